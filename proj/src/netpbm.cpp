#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

#include "csf/io.hpp"

namespace csf {
namespace {

struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

int parse_positive(const std::string& s, const fs::path& path) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char ch) { return std::isdigit(ch); }) ||
      s.size() > 9)
    throw FormatError("bad netpbm header field '" + s + "' in " + path.string());
  int v = std::stoi(s);
  if (v <= 0) throw FormatError("bad netpbm header field '" + s + "' in " + path.string());
  return v;
}

NetpbmHeader read_header(std::istream& in, const fs::path& path) {
  NetpbmHeader h;
  h.magic = next_token(in);
  h.width = parse_positive(next_token(in), path);
  h.height = parse_positive(next_token(in), path);
  h.maxval = parse_positive(next_token(in), path);
  if (static_cast<long long>(h.width) * h.height > (1LL << 30))
    throw FormatError("netpbm image too large in " + path.string());
  if (h.maxval > 65535) throw FormatError("netpbm maxval too large in " + path.string());
  return h;  // next_token consumed the single whitespace after maxval
}

std::size_t remaining_bytes(std::istream& in) {
  auto here = in.tellg();
  in.seekg(0, std::ios::end);
  auto end = in.tellg();
  in.seekg(here);
  return here < 0 || end < here ? 0 : static_cast<std::size_t>(end - here);
}

std::string read_body(std::istream& in, std::size_t bytes, const fs::path& path) {
  if (bytes > remaining_bytes(in)) throw FormatError("netpbm data truncated: " + path.string());
  std::string buf(bytes, '\0');
  if (!in.read(buf.data(), static_cast<std::streamsize>(bytes)))
    throw FormatError("netpbm data truncated: " + path.string());
  return buf;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

void write_all(const fs::path& path, const std::string& header, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << header;
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::string header_text(const char* magic, int w, int h, int maxval) {
  return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n" +
         std::to_string(maxval) + "\n";
}

}  // namespace

DepthMap read_depth_pgm(const fs::path& path) {
  auto in = open_in(path);
  auto h = read_header(in, path);
  if (h.magic != "P5") throw FormatError("depth must be a binary PGM (P5): " + path.string());
  if (h.maxval < 256) throw FormatError("depth PGM must be 16-bit: " + path.string());
  DepthMap d(h.width, h.height);
  auto body = read_body(in, d.size() * 2, path);
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto hi = static_cast<unsigned char>(body[2 * i]);
    auto lo = static_cast<unsigned char>(body[2 * i + 1]);
    d.values[i] = static_cast<std::uint16_t>((hi << 8) | lo);
  }
  return d;
}

void write_depth_pgm(const DepthMap& depth, const fs::path& path) {
  std::string body(depth.size() * 2, '\0');
  for (std::size_t i = 0; i < depth.size(); ++i) {
    body[2 * i] = static_cast<char>(depth.values[i] >> 8);
    body[2 * i + 1] = static_cast<char>(depth.values[i] & 0xff);
  }
  write_all(path, header_text("P5", depth.width, depth.height, 65535), body);
}

Image<std::uint8_t> read_gray_pgm(const fs::path& path) {
  auto in = open_in(path);
  auto h = read_header(in, path);
  if (h.magic != "P5") throw FormatError("expected a binary PGM (P5): " + path.string());
  if (h.maxval > 255) throw FormatError("expected an 8-bit PGM: " + path.string());
  Image<std::uint8_t> img(h.width, h.height);
  auto body = read_body(in, img.size(), path);
  std::copy(body.begin(), body.end(), reinterpret_cast<char*>(img.values.data()));
  return img;
}

void write_gray_pgm(const Image<std::uint8_t>& img, const fs::path& path) {
  std::string body(reinterpret_cast<const char*>(img.values.data()), img.size());
  write_all(path, header_text("P5", img.width, img.height, 255), body);
}

LabelMask read_label_pgm(const fs::path& path, const ClassTable& classes) {
  auto raw = read_gray_pgm(path);
  LabelMask m(raw.width, raw.height);
  for (std::size_t i = 0; i < raw.size(); ++i) m.values[i] = classes.from_file_label(raw.values[i]);
  return m;
}

void write_label_pgm(const LabelMask& mask, const fs::path& path, const ClassTable& classes) {
  Image<std::uint8_t> raw(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.size(); ++i) raw.values[i] = classes.to_file_label(mask.values[i]);
  write_gray_pgm(raw, path);
}

RgbImage read_ppm(const fs::path& path) {
  auto in = open_in(path);
  auto h = read_header(in, path);
  if (h.magic != "P6") throw FormatError("expected a binary PPM (P6): " + path.string());
  if (h.maxval > 255) throw FormatError("expected an 8-bit PPM: " + path.string());
  RgbImage img(h.width, h.height);
  auto body = read_body(in, img.size() * 3, path);
  for (std::size_t i = 0; i < img.size(); ++i)
    img.values[i] = {static_cast<std::uint8_t>(body[3 * i]), static_cast<std::uint8_t>(body[3 * i + 1]),
                     static_cast<std::uint8_t>(body[3 * i + 2])};
  return img;
}

void write_ppm(const RgbImage& img, const fs::path& path) {
  std::string body(img.size() * 3, '\0');
  for (std::size_t i = 0; i < img.size(); ++i) {
    body[3 * i] = static_cast<char>(img.values[i].r);
    body[3 * i + 1] = static_cast<char>(img.values[i].g);
    body[3 * i + 2] = static_cast<char>(img.values[i].b);
  }
  write_all(path, header_text("P6", img.width, img.height, 255), body);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<int> DatasetLayout::frame_indices() const {
  std::vector<int> out;
  const auto dir = root / "depth";
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".pgm") continue;
    const auto stem = e.path().stem().string();
    if (stem.empty() || stem.size() > 9 ||
        !std::all_of(stem.begin(), stem.end(), [](char c) { return std::isdigit(c); }))
      continue;
    out.push_back(std::stoi(stem));
  }
  std::sort(out.begin(), out.end());
  return out;
}

int DatasetLayout::sequence_length() const {
  auto idx = frame_indices();
  return idx.empty() ? 0 : idx.back() + 1;
}

FrameRecord load_frame(const fs::path& dir, int index, const ClassTable& classes) {
  DatasetLayout layout{dir};
  for (const auto& p : {layout.depth(index), layout.pose(index), layout.intrinsics()})
    if (!fs::exists(p)) throw IoError("missing file: " + p.string());
  FrameRecord f;
  f.frame_index = index;
  f.intrinsics = CameraIntrinsics::load(layout.intrinsics());
  f.pose = CameraPose::load(layout.pose(index));
  f.depth = read_depth_pgm(layout.depth(index));
  if (fs::exists(layout.color(index))) f.color = read_ppm(layout.color(index));
  if (fs::exists(layout.label(index))) f.mask = read_label_pgm(layout.label(index), classes);
  f.validate(classes);
  return f;
}

void write_frame(const FrameRecord& frame, const fs::path& dir, const ClassTable& classes) {
  frame.validate(classes);
  DatasetLayout layout{dir};
  fs::create_directories(dir / "depth");
  fs::create_directories(dir / "pose");
  frame.intrinsics.save(layout.intrinsics());
  frame.pose.save(layout.pose(frame.frame_index));
  write_depth_pgm(frame.depth, layout.depth(frame.frame_index));
  if (frame.color) {
    fs::create_directories(dir / "color");
    write_ppm(*frame.color, layout.color(frame.frame_index));
  }
  if (frame.mask) {
    fs::create_directories(dir / "label");
    write_label_pgm(*frame.mask, layout.label(frame.frame_index), classes);
  }
}

}  // namespace csf
