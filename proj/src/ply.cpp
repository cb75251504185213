#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "csf/io.hpp"

namespace csf {
namespace {

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

PlyType parse_type(const std::string& s) {
  if (s == "char" || s == "int8") return PlyType::i8;
  if (s == "uchar" || s == "uint8") return PlyType::u8;
  if (s == "short" || s == "int16") return PlyType::i16;
  if (s == "ushort" || s == "uint16") return PlyType::u16;
  if (s == "int" || s == "int32") return PlyType::i32;
  if (s == "uint" || s == "uint32") return PlyType::u32;
  if (s == "float" || s == "float32") return PlyType::f32;
  if (s == "double" || s == "float64") return PlyType::f64;
  throw FormatError("unknown property type: " + s);
}

std::size_t type_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 0;
}

template <typename T>
T load_le(const char* p) {
  std::array<char, sizeof(T)> buf;
  std::memcpy(buf.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  T v;
  std::memcpy(&v, buf.data(), sizeof(T));
  return v;
}

template <typename T>
void store_le(std::string& out, T v) {
  std::array<char, sizeof(T)> buf;
  std::memcpy(buf.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  out.append(buf.data(), buf.size());
}

double decode(PlyType t, const char* p) {
  switch (t) {
    case PlyType::i8: return load_le<std::int8_t>(p);
    case PlyType::u8: return load_le<std::uint8_t>(p);
    case PlyType::i16: return load_le<std::int16_t>(p);
    case PlyType::u16: return load_le<std::uint16_t>(p);
    case PlyType::i32: return load_le<std::int32_t>(p);
    case PlyType::u32: return load_le<std::uint32_t>(p);
    case PlyType::f32: return load_le<float>(p);
    case PlyType::f64: return load_le<double>(p);
  }
  return 0;
}

struct Property {
  std::string name;
  PlyType type;
  std::size_t offset;
};

struct Header {
  PlyEncoding encoding = PlyEncoding::ascii;
  std::size_t vertex_count = 0;
  std::vector<Property> props;
  std::size_t stride = 0;

  int find(const std::string& name) const {
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

Header parse_header(std::istream& in, const fs::path& path) {
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "ply")
    throw FormatError("malformed header: missing 'ply' magic in " + path.string());
  Header h;
  bool have_format = false, in_vertex = false, seen_vertex = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
    if (kw == "end_header") {
      if (!have_format) throw FormatError("malformed header: no format line");
      if (!seen_vertex) throw FormatError("malformed header: no vertex element");
      return h;
    }
    if (kw == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt == "ascii") h.encoding = PlyEncoding::ascii;
      else if (fmt == "binary_little_endian") h.encoding = PlyEncoding::binary_little_endian;
      else throw FormatError("malformed header: unsupported format " + fmt);
      have_format = true;
    } else if (kw == "element") {
      std::string name;
      long long count = -1;
      ls >> name >> count;
      if (count < 0) throw FormatError("malformed header: bad element line");
      if (name == "vertex") {
        if (seen_vertex) throw FormatError("malformed header: duplicate vertex element");
        h.vertex_count = static_cast<std::size_t>(count);
        in_vertex = seen_vertex = true;
      } else {
        // Elements after the vertices are never read; elements before them would need skipping.
        if (!seen_vertex) throw FormatError("malformed header: vertex must be the first element");
        in_vertex = false;
      }
    } else if (kw == "property") {
      std::string type, name;
      ls >> type;
      if (type == "list") {
        if (in_vertex) throw FormatError("malformed header: list property on vertex");
        continue;
      }
      ls >> name;
      if (name.empty()) throw FormatError("malformed header: property without name");
      if (!in_vertex) continue;
      PlyType t = parse_type(type);
      h.props.push_back({name, t, h.stride});
      h.stride += type_size(t);
    } else {
      throw FormatError("malformed header: unexpected line '" + line + "'");
    }
  }
  throw FormatError("malformed header: missing end_header");
}

}  // namespace

ScenePointCloud load_scene(const fs::path& path, const ClassTable& classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Header h = parse_header(in, path);

  const int ix = h.find("x"), iy = h.find("y"), iz = h.find("z");
  if (ix < 0 || iy < 0 || iz < 0) throw FormatError("PLY lacks x/y/z properties");
  const int ir = h.find("red"), ig = h.find("green"), ib = h.find("blue");
  const bool has_color = ir >= 0 && ig >= 0 && ib >= 0;
  const int il = h.find("label");

  const std::size_t n = h.vertex_count;
  {
    // Every vertex needs at least `stride` bytes in binary and one byte per property in ASCII.
    const auto here = in.tellg();
    in.seekg(0, std::ios::end);
    const auto left = static_cast<std::size_t>(in.tellg() - here);
    in.seekg(here);
    const std::size_t per_row = h.encoding == PlyEncoding::ascii ? h.props.size() : h.stride;
    if (per_row > 0 && n > left / per_row) throw FormatError("PLY body truncated: " + path.string());
  }
  ScenePointCloud cloud;
  cloud.positions.resize(n);
  if (has_color) cloud.colors.resize(n);
  if (il >= 0) cloud.gt_labels.resize(n);

  std::vector<double> row(h.props.size());
  auto read_row = [&](std::size_t i) {
    auto f = [&](int k) { return static_cast<float>(row[k]); };
    cloud.positions[i] = Eigen::Vector3f(f(ix), f(iy), f(iz));
    if (has_color) {
      auto c = [&](int k) {
        double v = row[k];
        if (!(v >= 0 && v <= 255)) throw FormatError("color value out of range");
        return static_cast<std::uint8_t>(v);
      };
      cloud.colors[i] = {c(ir), c(ig), c(ib)};
    }
    if (il >= 0) {
      double v = row[il];
      if (!(v >= 0) || v != std::floor(v) || v > 65535)
        throw InvariantError("label out of range");
      cloud.gt_labels[i] = classes.from_file_label(static_cast<std::uint32_t>(v));
    }
  };

  if (h.encoding == PlyEncoding::binary_little_endian) {
    std::string buf(h.stride * n, '\0');
    if (!in.read(buf.data(), static_cast<std::streamsize>(buf.size())))
      throw FormatError("PLY body truncated: " + path.string());
    for (std::size_t i = 0; i < n; ++i) {
      const char* base = buf.data() + i * h.stride;
      for (std::size_t k = 0; k < h.props.size(); ++k)
        row[k] = decode(h.props[k].type, base + h.props[k].offset);
      read_row(i);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < h.props.size(); ++k)
        if (!(in >> row[k])) throw FormatError("PLY body truncated: " + path.string());
      read_row(i);
    }
  }
  cloud.validate(classes);
  return cloud;
}

void save_scene(const ScenePointCloud& cloud, std::optional<std::span<const ClassId>> labels,
                const fs::path& path, const ClassTable& classes, PlyEncoding encoding) {
  const std::size_t n = cloud.size();
  std::span<const ClassId> lab;
  if (labels) lab = *labels;
  else if (cloud.has_labels()) lab = cloud.gt_labels;
  if (!lab.empty() && lab.size() != n) throw InvariantError("label count does not match point count");
  const bool with_labels = labels.has_value() || cloud.has_labels();
  const bool with_color = cloud.has_colors();

  std::string out;
  out += "ply\n";
  out += encoding == PlyEncoding::ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n";
  out += "element vertex " + std::to_string(n) + "\n";
  out += "property float x\nproperty float y\nproperty float z\n";
  if (with_color) out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (with_labels) out += "property uchar label\n";
  out += "end_header\n";

  if (encoding == PlyEncoding::binary_little_endian) {
    out.reserve(out.size() + n * (12 + 3 * with_color + with_labels));
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = cloud.positions[i];
      store_le(out, p.x());
      store_le(out, p.y());
      store_le(out, p.z());
      if (with_color) {
        store_le(out, cloud.colors[i].r);
        store_le(out, cloud.colors[i].g);
        store_le(out, cloud.colors[i].b);
      }
      if (with_labels) store_le(out, classes.to_file_label(lab[i]));
    }
  } else {
    std::ostringstream os;
    os.precision(9);  // round-trips float exactly
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = cloud.positions[i];
      os << p.x() << ' ' << p.y() << ' ' << p.z();
      if (with_color)
        os << ' ' << int(cloud.colors[i].r) << ' ' << int(cloud.colors[i].g) << ' '
           << int(cloud.colors[i].b);
      if (with_labels) os << ' ' << int(classes.to_file_label(lab[i]));
      os << '\n';
    }
    out += os.str();
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace csf
