#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "hpnet/errors.hpp"
#include "hpnet/neurophys.hpp"
#include "hpnet/random.hpp"

namespace hpnet {

std::size_t StimulusProtocol::length() const {
  return kind == ProtocolKind::PairedSequence ? gray_lead + image1_dur + gap + image2_dur
                                              : gray_lead + static_dur;
}

std::pair<std::size_t, std::size_t> StimulusProtocol::late_window() const {
  if (kind == ProtocolKind::PairedSequence) {
    const std::size_t b = gray_lead + image1_dur + gap;
    return {b, b + image2_dur};
  }
  const std::size_t end = gray_lead + static_dur;
  return {end - std::min<std::size_t>(5, static_dur), end};
}

void StimulusProtocol::validate() const {
  const bool paired = kind == ProtocolKind::PairedSequence;
  if ((paired && (image1_dur < 1 || gap < 1 || image2_dur < 1)) || (!paired && static_dur < 1) ||
      gray_lead < 1) {
    throw ContractError("stimulus protocol: durations must be >= 1");
  }
}

std::vector<Frame> make_texture_pool(std::size_t n, std::size_t height, std::size_t width,
                                     std::uint64_t seed) {
  constexpr double kTau = 6.283185307179586;
  std::vector<Frame> pool;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    Frame f(height, width, 0.0);
    const int gratings = 1 + static_cast<int>(rng.below(2));
    for (int g = 0; g < gratings; ++g) {
      const double theta = rng.uniform(0.0, kTau / 2.0);
      const double freq = rng.uniform(1.0, 4.0) / static_cast<double>(std::max(height, width));
      const double phase = rng.uniform(0.0, kTau);
      const double amp = rng.uniform(0.2, 0.4) / gratings;
      const double cx = std::cos(theta), sy = std::sin(theta);
      for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c)
          f.at(r, c) += amp * std::sin(kTau * freq * (cx * double(c) + sy * double(r)) + phase);
    }
    const int blobs = 1 + static_cast<int>(rng.below(3));
    for (int b = 0; b < blobs; ++b) {
      const double br = rng.uniform(0.0, double(height)), bc = rng.uniform(0.0, double(width));
      const double rad = rng.uniform(0.12, 0.3) * double(std::min(height, width));
      const double amp = rng.uniform(-0.45, 0.45);
      for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c) {
          const double d2 = (double(r) - br) * (double(r) - br) + (double(c) - bc) * (double(c) - bc);
          f.at(r, c) += amp * std::exp(-d2 / (2.0 * rad * rad));
        }
    }
    for (auto& p : f.pixels) p = std::clamp(0.5 + p, 0.0, 1.0);
    pool.push_back(std::move(f));
  }
  return pool;
}

namespace {

void append(std::vector<Frame>& out, const Frame& f, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) out.push_back(f);
}

}  // namespace

ProtocolSet build_protocol_sequences(const StimulusProtocol& protocol,
                                     const std::vector<Frame>& pool, std::size_t n_items,
                                     std::uint64_t seed) {
  protocol.validate();
  const bool paired = protocol.kind == ProtocolKind::PairedSequence;
  if (n_items < (paired ? 2u : 1u) || pool.size() < 2 * n_items) {
    throw ContractError("build_protocol_sequences: need a pool of at least " +
                        std::to_string(2 * std::max<std::size_t>(n_items, paired ? 2 : 1)) +
                        " images, got " + std::to_string(pool.size()));
  }
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx.begin(), idx.end());

  const Frame gray(pool[0].height, pool[0].width, kGray);
  ProtocolSet set;
  if (paired) {
    auto make = [&](const char* cond, std::size_t a, std::size_t b) {
      LabeledSequence s{cond, a, b, {}};
      append(s.frames, gray, protocol.gray_lead);
      append(s.frames, pool[a], protocol.image1_dur);
      append(s.frames, gray, protocol.gap);
      append(s.frames, pool[b], protocol.image2_dur);
      return s;
    };
    for (std::size_t i = 0; i < n_items; ++i) {
      set.exposed.push_back(make("predicted", idx[i], idx[n_items + i]));
      set.control.push_back(make("unpredicted", idx[i], idx[n_items + (i + 1) % n_items]));
    }
  } else {
    auto make = [&](const char* cond, std::size_t a) {
      LabeledSequence s{cond, a, a, {}};
      append(s.frames, gray, protocol.gray_lead);
      append(s.frames, pool[a], protocol.static_dur);
      return s;
    };
    for (std::size_t i = 0; i < n_items; ++i) {
      set.exposed.push_back(make("familiar", idx[i]));
      set.control.push_back(make("novel", idx[n_items + i]));
    }
  }
  return set;
}

std::vector<Tensor> protocol_blocks(const HPNetConfig& config, const std::vector<Frame>& frames) {
  if (frames.empty()) throw ContractError("protocol_blocks: no frames");
  const std::size_t d = config.block_depth, s = config.block_stride;
  std::vector<Frame> padded = frames;
  std::size_t n = std::max(padded.size(), d);
  if ((n - d) % s != 0) n += s - (n - d) % s;
  padded.resize(n, Frame(frames[0].height, frames[0].width, kGray));
  return extract_blocks(padded, d, s);
}

std::string_view unit_name(UnitKind kind) {
  switch (kind) {
    case UnitKind::E: return "E";
    case UnitKind::P: return "P";
    case UnitKind::R: return "R";
  }
  return "?";
}

ResponseTrace measure_responses(const HPNetConfig& config, const HPNetParams& params,
                                const std::vector<LabeledSequence>& sequences, UnitKind unit,
                                std::size_t level, std::size_t length) {
  if (level >= config.levels) {
    throw ContractError("measure_responses: level " + std::to_string(level + 1) +
                        " does not exist in a " + std::to_string(config.levels) + "-level net");
  }
  if (sequences.empty()) throw ContractError("measure_responses: no sequences");
  NoGradGuard no_grad;
  ResponseTrace trace;
  trace.unit = unit;
  trace.level = level;
  trace.condition = sequences[0].condition;
  trace.values.assign(length, 0.0);

  const std::size_t d = config.block_depth, s = config.block_stride;
  const std::size_t h = config.level_height(level), w = config.level_width(level);
  const std::size_t r0 = h / 4, r1 = h - h / 4, c0 = w / 4, c1 = w - w / 4;
  for (const auto& seq : sequences) {
    const auto blocks = protocol_blocks(config, seq.frames);
    NetworkState state = initial_state(config);
    std::vector<double> per_frame(blocks.size() * s + d, 0.0);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      auto step = network_step(config, params, blocks[k], state);
      state = std::move(step.state);
      const auto& st = state[level];
      const Tensor& src = unit == UnitKind::E ? st.E : unit == UnitKind::P ? st.P_prev : st.R;
      const std::size_t ch = src.dim(0);
      auto data = src.data();
      for (std::size_t t = 0; t < d; ++t) {
        double sum = 0.0;
        for (std::size_t c = 0; c < ch; ++c)
          for (std::size_t r = r0; r < r1; ++r)
            for (std::size_t q = c0; q < c1; ++q) {
              const double v = data[((c * d + t) * h + r) * w + q];
              sum += unit == UnitKind::R ? std::max(v, 0.0) : std::fabs(v);
            }
        per_frame[k * s + t] = sum / static_cast<double>(ch * (r1 - r0) * (c1 - c0));
      }
    }
    for (std::size_t f = 0; f < length; ++f) trace.values[f] += per_frame[f];
  }
  for (auto& v : trace.values) v /= static_cast<double>(sequences.size());
  return trace;
}

double suppression_index(const std::vector<double>& novel, const std::vector<double>& familiar,
                         std::size_t begin, std::size_t end) {
  if (novel.size() != familiar.size()) {
    throw DimensionError("suppression_index: traces of length " + std::to_string(novel.size()) +
                         " and " + std::to_string(familiar.size()));
  }
  if (begin >= end || end > novel.size()) {
    throw ContractError("suppression_index: window outside the traces");
  }
  double mn = 0.0, mf = 0.0;
  for (std::size_t i = begin; i < end; ++i) mn += novel[i], mf += familiar[i];
  const double n = static_cast<double>(end - begin);
  mn /= n;
  mf /= n;
  if (mn + mf == 0.0) throw UndefinedResultError("suppression_index: both windows are zero");
  return (mn - mf) / (mn + mf);
}

void write_traces(std::ostream& os, const std::vector<ResponseTrace>& traces) {
  const auto old = os.precision(10);
  os << "# hpnet-neurophys v1\n";
  for (const auto& t : traces)
    for (std::size_t f = 0; f < t.values.size(); ++f)
      os << f << '\t' << t.condition << '\t' << unit_name(t.unit) << '\t' << t.level + 1 << '\t'
         << t.values[f] << '\n';
  os.precision(old);
}

}  // namespace hpnet

namespace hpnet {

std::vector<TrainRecord> exposure_train(TrainState& state,
                                        const std::vector<LabeledSequence>& exposed,
                                        std::size_t epochs, const TrainOptions& options) {
  std::vector<BlockSequence> blocks;
  blocks.reserve(exposed.size());
  for (const auto& s : exposed) blocks.push_back(protocol_blocks(state.config, s.frames));
  return train(state, blocks, {}, epochs, options);
}

ProtocolResult run_protocol(const HPNetConfig& config, const HPNetParams& params,
                            const StimulusProtocol& protocol, const ProtocolSet& set) {
  const std::size_t len = protocol.length();
  const auto [begin, end] = protocol.late_window();
  ProtocolResult out;
  for (UnitKind unit : {UnitKind::E, UnitKind::P, UnitKind::R})
    for (std::size_t level = 0; level < config.levels; ++level) {
      auto exposed = measure_responses(config, params, set.exposed, unit, level, len);
      auto control = measure_responses(config, params, set.control, unit, level, len);
      double index;
      try {
        index = suppression_index(control.values, exposed.values, begin, end);
      } catch (const UndefinedResultError&) {
        index = std::nan("");
      }
      out.indices.push_back({unit, level, index});
      out.traces.push_back(std::move(exposed));
      out.traces.push_back(std::move(control));
    }
  return out;
}

}  // namespace hpnet
