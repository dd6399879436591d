#pragma once

// Prediction-suppression and familiarity-suppression protocols.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hpnet/data.hpp"
#include "hpnet/network.hpp"
#include "hpnet/training.hpp"

namespace hpnet {

inline constexpr double kGray = 0.5;

enum class ProtocolKind { PairedSequence, StaticFamiliarity };

struct StimulusProtocol {
  ProtocolKind kind = ProtocolKind::PairedSequence;
  std::size_t gray_lead = 5;
  std::size_t image1_dur = 10;
  std::size_t gap = 2;
  std::size_t image2_dur = 10;
  std::size_t static_dur = 15;

  std::size_t length() const;
  /// [begin, end) of the second image (paired) or of the last five image
  /// frames (static).
  std::pair<std::size_t, std::size_t> late_window() const;
  void validate() const;
};

struct LabeledSequence {
  std::string condition;  // "predicted"/"unpredicted" or "familiar"/"novel"
  std::size_t first = 0, second = 0;  // pool indices; second unused for static
  std::vector<Frame> frames;
};

struct ProtocolSet {
  std::vector<LabeledSequence> exposed;  // predicted pairs or the familiar set
  std::vector<LabeledSequence> control;  // unpredicted pairs or the novel set
};

/// Seeded procedural textures: a few oriented gratings and soft blobs, each
/// image distinct, values in [0, 1].
std::vector<Frame> make_texture_pool(std::size_t n, std::size_t height, std::size_t width,
                                     std::uint64_t seed);

/// Splits a seeded shuffle of the pool into two halves of n_items each.
/// Paired: predicted pairs (A_i, B_i), unpredicted pairs (A_i, B_{i+1 mod n}),
/// so both conditions show exactly the same images. Static: familiar = first
/// half, novel = second half.
ProtocolSet build_protocol_sequences(const StimulusProtocol& protocol,
                                     const std::vector<Frame>& pool, std::size_t n_items,
                                     std::uint64_t seed);

/// Frames padded with gray to a whole number of blocks, then split.
std::vector<Tensor> protocol_blocks(const HPNetConfig& config, const std::vector<Frame>& frames);

enum class UnitKind { E, P, R };
std::string_view unit_name(UnitKind kind);

struct ResponseTrace {
  UnitKind unit = UnitKind::E;
  std::size_t level = 0;  // 0-based
  std::string condition;
  std::vector<double> values;  // per frame
};

/// Teacher-forced pass per sequence; per frame, the mean |activation| over
/// all channels in the central 50% crop of the level's units, averaged over
/// the sequences. R is read as ReLU(R); values from step k are attributed to
/// the frames of block k (later blocks win where blocks overlap).
ResponseTrace measure_responses(const HPNetConfig& config, const HPNetParams& params,
                                const std::vector<LabeledSequence>& sequences, UnitKind unit,
                                std::size_t level, std::size_t length);

/// (mean_novel - mean_familiar) / (mean_novel + mean_familiar) over [begin, end).
double suppression_index(const std::vector<double>& novel, const std::vector<double>& familiar,
                         std::size_t begin, std::size_t end);

/// Trains on the exposed condition only (teacher-forced, standard loss).
std::vector<TrainRecord> exposure_train(TrainState& state,
                                        const std::vector<LabeledSequence>& exposed,
                                        std::size_t epochs, const TrainOptions& options = {});

struct SuppressionResult {
  UnitKind unit = UnitKind::E;
  std::size_t level = 0;
  double index = 0.0;
};

struct ProtocolResult {
  std::vector<ResponseTrace> traces;  // exposed then control, per unit and level
  std::vector<SuppressionResult> indices;
};

/// Traces for E, P and R at every level, and the suppression index of the
/// control condition against the exposed one over the protocol's late window
/// (NaN where both windows are silent).
ProtocolResult run_protocol(const HPNetConfig& config, const HPNetParams& params,
                            const StimulusProtocol& protocol, const ProtocolSet& set);

/// "# hpnet-neurophys v1", then `frame<TAB>condition<TAB>unit<TAB>level<TAB>value`
/// with 1-based levels.
void write_traces(std::ostream& os, const std::vector<ResponseTrace>& traces);

}  // namespace hpnet
