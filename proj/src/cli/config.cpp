#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "hpnet/cli.hpp"
#include "hpnet/errors.hpp"

namespace hpnet::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) {
    throw ConfigError(std::string(key), "'" + std::string(v) + "' is not a valid number");
  }
  return out;
}

std::size_t parse_count(std::string_view key, std::string_view v) {
  return parse_number<std::size_t>(key, v);
}

double parse_real(std::string_view key, std::string_view v) {
  const double x = parse_number<double>(key, v);
  if (!std::isfinite(x)) throw ConfigError(std::string(key), "must be finite");
  return x;
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(parse_count(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

bool is_motion(std::string_view v) {
  if (v == "mixed") return true;
  for (std::size_t m = 0; m < kMovementClassCount; ++m)
    if (movement_name(static_cast<MovementClass>(m)) == v) return true;
  return false;
}

bool has(const std::vector<std::string>& keys, std::string_view k) {
  return std::find(keys.begin(), keys.end(), k) != keys.end();
}

}  // namespace

const std::vector<std::string_view>& config_keys() {
  static const std::vector<std::string_view> keys{
      "levels", "channels", "block_depth", "block_stride", "scheme", "frame_size",
      "p_max", "upper_level_weight", "lr", "clip_norm", "epochs", "seed",
      "n", "frames", "motion", "val", "seed_frames", "horizon",
      "index", "pairs", "data", "out", "checkpoint", "pred_dir"};
  return keys;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const std::string k(key);
  value = trim(value);
  if (key == "levels") {
    net.levels = parse_count(key, value);
  } else if (key == "channels") {
    net.channels = parse_list(key, value);
  } else if (key == "block_depth") {
    net.block_depth = parse_count(key, value);
  } else if (key == "block_stride") {
    net.block_stride = parse_count(key, value);
  } else if (key == "scheme") {
    try {
      net.scheme = parse_scheme(value);
    } catch (const std::exception&) {
      throw ConfigError(k, "expected ff, bf or bb, got '" + std::string(value) + "'");
    }
  } else if (key == "frame_size") {
    const auto x = value.find('x');
    if (x == std::string_view::npos) {
      net.frame_height = net.frame_width = parse_count(key, value);
    } else {
      net.frame_height = parse_count(key, value.substr(0, x));
      net.frame_width = parse_count(key, value.substr(x + 1));
    }
  } else if (key == "p_max") {
    net.p_max = parse_real(key, value);
  } else if (key == "upper_level_weight") {
    net.upper_level_weight = parse_real(key, value);
  } else if (key == "lr") {
    adam.lr = parse_real(key, value);
    if (adam.lr <= 0.0) throw ConfigError(k, "must be positive");
  } else if (key == "clip_norm") {
    clip_norm = parse_real(key, value);
  } else if (key == "epochs") {
    epochs = parse_count(key, value);
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "n") {
    n = parse_count(key, value);
  } else if (key == "frames") {
    frames = parse_count(key, value);
  } else if (key == "motion") {
    if (!is_motion(value)) throw ConfigError(k, "unknown motion class '" + std::string(value) + "'");
    motion = value;
  } else if (key == "val") {
    val = parse_count(key, value);
  } else if (key == "seed_frames") {
    seed_frames = parse_count(key, value);
  } else if (key == "horizon") {
    horizon = parse_count(key, value);
  } else if (key == "index") {
    index = parse_count(key, value);
  } else if (key == "pairs") {
    pairs = parse_count(key, value);
  } else if (key == "data") {
    data = value;
  } else if (key == "out") {
    out = value;
  } else if (key == "checkpoint") {
    checkpoint = value;
  } else if (key == "pred_dir") {
    pred_dir = value;
  } else {
    throw ConfigError(k, "unknown key");
  }
  if (!has(explicit_keys, k)) explicit_keys.push_back(k);
}

void RunConfig::finalize() {
  const bool depth = has(explicit_keys, "block_depth"), stride = has(explicit_keys, "block_stride");
  const HPNetConfig conv = HPNetConfig::for_scheme(net.scheme, 1, {1});
  if (!depth) net.block_depth = conv.block_depth;
  if (!stride) net.block_stride = net.scheme == Scheme::BlockToBlock ? net.block_depth : 1;
  const bool lv = has(explicit_keys, "levels"), ch = has(explicit_keys, "channels");
  if (ch && !lv) net.levels = net.channels.size();
  if (lv && !ch) {
    net.channels.clear();
    for (std::size_t l = 0; l < net.levels; ++l) net.channels.push_back(std::size_t{8} << l);
  }
  if (net.channels.size() != net.levels) {
    throw ConfigError("channels", std::to_string(net.channels.size()) + " widths for " +
                                      std::to_string(net.levels) + " levels");
  }
  try {
    net.validate();
  } catch (const ContractError& e) {
    const std::string what = e.what();
    std::string key = "levels";
    if (what.find("depth") != std::string::npos || what.find("stride") != std::string::npos)
      key = "block_depth";
    else if (what.find("frame") != std::string::npos)
      key = "frame_size";
    else if (what.find("channel") != std::string::npos)
      key = "channels";
    throw ConfigError(key, what);
  }
  if (val >= n && n > 0 && val > 0) throw ConfigError("val", "must be smaller than n");
}

void apply_config_text(RunConfig& cfg, std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(line), "line " + std::to_string(line_no) + " has no '='");
    }
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  apply_config_text(cfg, ss.str());
}

SequenceSpec data_spec(const RunConfig& cfg) {
  SequenceSpec s;
  s.height = cfg.net.frame_height;
  s.width = cfg.net.frame_width;
  s.n_frames = cfg.frames;
  if (cfg.motion != "mixed")
    for (std::size_t m = 0; m < kMovementClassCount; ++m)
      if (movement_name(static_cast<MovementClass>(m)) == cfg.motion)
        s.movement = static_cast<MovementClass>(m);
  return s;
}

std::vector<Sequence> load_or_generate(const RunConfig& cfg) {
  if (!cfg.data.empty()) return read_dataset(cfg.data);
  const SequenceSpec base = data_spec(cfg);
  std::vector<Sequence> out;
  out.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i)
    out.push_back(generate_sequence(dataset_item_spec(base, cfg.seed, i, cfg.motion == "mixed")));
  return out;
}

void write_pgm(const std::filesystem::path& path, const Frame& frame) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << "P5\n" << frame.width << ' ' << frame.height << "\n255\n";
  std::string bytes(frame.pixels.size(), '\0');
  std::transform(frame.pixels.begin(), frame.pixels.end(), bytes.begin(),
                 [](double p) { return static_cast<char>(quantize_pixel(p)); });
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("short write to " + path.string());
}

Frame read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  auto token = [&]() {
    std::string t;
    while (true) {
      const int c = is.get();
      if (c == EOF) break;
      if (c == '#') {
        std::string rest;
        std::getline(is, rest);
        continue;
      }
      if (std::isspace(c)) {
        if (t.empty()) continue;
        break;
      }
      t.push_back(static_cast<char>(c));
    }
    return t;
  };
  if (token() != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)", 0);
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed PGM header", static_cast<std::uint64_t>(is.tellg()));
  }
  if (maxval != 255) {
    throw FormatError(path.string() + ": maxval " + std::to_string(maxval) + " (expected 255)",
                      static_cast<std::uint64_t>(is.tellg()));
  }
  const auto offset = static_cast<std::uint64_t>(is.tellg());
  std::string bytes(w * h, '\0');
  is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(is.gcount()) != bytes.size()) {
    throw FormatError(path.string() + ": truncated pixel data",
                      offset + static_cast<std::uint64_t>(is.gcount()));
  }
  Frame f(h, w);
  for (std::size_t i = 0; i < bytes.size(); ++i)
    f.pixels[i] = static_cast<unsigned char>(bytes[i]) / 255.0;
  return f;
}

}  // namespace hpnet::cli
