#include "csf/app/config.hpp"

#include <charconv>
#include <sstream>

#include "csf/io.hpp"

namespace csf::app {

MaskSource parse_mask_source(const std::string& s) {
  if (s == "directory") return MaskSource::directory;
  if (s == "oracle") return MaskSource::oracle;
  if (s == "prompted-oracle" || s == "prompted_oracle") return MaskSource::prompted_oracle;
  throw InvariantError("unknown mask source: " + s);
}

std::string to_string(MaskSource s) {
  switch (s) {
    case MaskSource::directory: return "directory";
    case MaskSource::oracle: return "oracle";
    case MaskSource::prompted_oracle: return "prompted-oracle";
  }
  return "oracle";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw InvariantError("bad value for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvariantError("bad value for " + key + ": '" + v + "'");
}

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  const std::string& v = value;
  if (key == "scene") scene = v;
  else if (key == "frames") frames = v;
  else if (key == "mask_source") mask_source = parse_mask_source(v);
  else if (key == "mask_dir") mask_dir = v;
  else if (key == "noise_morph_radius") noise.morph_radius_px = parse_number<int>(key, v);
  else if (key == "noise_drop") noise.drop_instance_prob = parse_number<double>(key, v);
  else if (key == "noise_mislabel") noise.mislabel_prob = parse_number<double>(key, v);
  else if (key == "frame_stride") frame_stride = parse_number<int>(key, v);
  else if (key == "pixel_stride") pixel_stride = parse_number<int>(key, v);
  else if (key == "radius") radius_m = parse_number<double>(key, v);
  else if (key == "strategy") strategy = parse_strategy(v);
  else if (key == "policy") policy = parse_policy(v);
  else if (key == "classes") classes = v;
  else if (key == "out") out = v;
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, v);
  else if (key == "skip_missing") skip_missing = parse_bool(key, v);
  else if (key == "save_accumulator") save_accumulator = parse_bool(key, v);
  else if (key == "synth") synth = parse_bool(key, v);
  else if (key == "synth_frames") synth_frames = parse_number<int>(key, v);
  else if (key == "synth_objects") synth_objects = parse_number<int>(key, v);
  else if (key == "synth_density") synth_density = parse_number<double>(key, v);
  else if (key == "fixtures") fixtures = parse_number<int>(key, v);
  else if (key == "frame_list") {
    frame_list.clear();
    std::istringstream in(v);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      tok = trim(tok);
      if (!tok.empty()) frame_list.push_back(parse_number<int>(key, tok));
    }
  } else {
    throw InvariantError("unknown config key: " + key);
  }
}

std::map<std::string, std::string> PipelineConfig::entries() const {
  std::string list;
  for (std::size_t i = 0; i < frame_list.size(); ++i) list += (i ? "," : "") + std::to_string(frame_list[i]);
  return {{"scene", scene.string()},
          {"frames", frames.string()},
          {"mask_source", to_string(mask_source)},
          {"mask_dir", mask_dir.string()},
          {"noise_morph_radius", std::to_string(noise.morph_radius_px)},
          {"noise_drop", fmt(noise.drop_instance_prob)},
          {"noise_mislabel", fmt(noise.mislabel_prob)},
          {"frame_stride", std::to_string(frame_stride)},
          {"pixel_stride", std::to_string(pixel_stride)},
          {"radius", fmt(radius_m)},
          {"strategy", to_string(strategy)},
          {"policy", to_string(policy)},
          {"classes", classes.string()},
          {"out", out.string()},
          {"seed", std::to_string(seed)},
          {"skip_missing", skip_missing ? "true" : "false"},
          {"save_accumulator", save_accumulator ? "true" : "false"},
          {"synth", synth ? "true" : "false"},
          {"synth_frames", std::to_string(synth_frames)},
          {"synth_objects", std::to_string(synth_objects)},
          {"synth_density", fmt(synth_density)},
          {"fixtures", std::to_string(fixtures)},
          {"frame_list", list}};
}

void PipelineConfig::validate() const {
  if (frame_stride < 1) throw InvariantError("frame_stride must be >= 1");
  if (pixel_stride < 1) throw InvariantError("pixel_stride must be >= 1");
  if (!(radius_m > 0)) throw InvariantError("radius must be > 0");
  if (synth_frames < 1) throw InvariantError("synth_frames must be >= 1");
  if (fixtures < 1) throw InvariantError("fixtures must be >= 1");
  noise.validate();
}

PipelineConfig PipelineConfig::parse(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const InvariantError& e) {
      throw FormatError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

}  // namespace csf::app
