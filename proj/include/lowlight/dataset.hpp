#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lowlight/grid.hpp"
#include "lowlight/lighting.hpp"
#include "lowlight/rng.hpp"

namespace lowlight {

inline constexpr double kDefaultConsensusThreshold = 0.8;

/// Axis-aligned pixel box: top-left (x, y), extent w x h.
struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  long long area() const { return static_cast<long long>(w) * h; }
  bool contains(int px, int py) const { return px >= x && px < x + w && py >= y && py < y + h; }
  bool fits(Index height, Index width) const { return x + w <= width && y + h <= height; }
  void validate() const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

double box_iou(const BoundingBox& a, const BoundingBox& b);

std::optional<BoundingBox> box_intersection(const BoundingBox& a, const BoundingBox& b);

Mask box_mask(const BoundingBox& box, Index height, Index width);

struct ConsensusOutcome {
  /// Intersection of all boxes; empty when the object is dropped.
  std::optional<BoundingBox> region;
  double min_pairwise_iou = 0.0;

  bool accepted() const { return region.has_value(); }
};

/// Keep an object iff every pair of annotator boxes has IoU > threshold; the
/// kept region is the intersection of all boxes.
ConsensusOutcome consensus_region(std::span<const BoundingBox> boxes, double threshold = kDefaultConsensusThreshold);

struct AnnotatorBoxes {
  std::string annotator_id;
  std::vector<BoundingBox> boxes;
};

struct AnnotationRecord {
  std::string image_id;
  std::vector<AnnotatorBoxes> annotator_boxes;
  std::optional<Mask> consensus;
};

/// Runs consensus per object (the k-th box of every annotator is object k),
/// and stores the union of accepted regions as the record's consensus mask.
/// Returns one outcome per object. Leaves `consensus` empty when nothing is kept.
std::vector<ConsensusOutcome> apply_consensus(AnnotationRecord& record, Index height, Index width,
                                              double threshold = kDefaultConsensusThreshold);

enum class Split { train, test };
enum class Stage { stage1_7to9pm, stage2_9to11pm };
enum class ObjectType { single_person, multiple_persons, vehicle };

std::string_view to_string(Split s);
std::string_view to_string(Stage s);
std::string_view to_string(ObjectType t);
Split parse_split(std::string_view s);
Stage parse_stage(std::string_view s);
ObjectType parse_object_type(std::string_view s);

struct ManifestEntry {
  std::string image;
  std::string gt;
  Split split = Split::train;
  Stage stage = Stage::stage1_7to9pm;
  ObjectType object_type = ObjectType::single_person;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  /// Image paths unique, gt paths unique.
  void validate() const;
};

/// JSON array of {image, gt, split, stage, object_type}.
Manifest parse_manifest(std::string_view json_text);
std::string manifest_to_json(const Manifest& m);
Manifest load_manifest(const std::filesystem::path& path);
/// Written to a sibling temporary file, then renamed over `path`.
void save_manifest(const Manifest& m, const std::filesystem::path& path);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t test = 0;
};

struct SplitSummary {
  SplitCounts total;
  std::map<Stage, SplitCounts> by_stage;
  std::map<ObjectType, SplitCounts> by_object_type;
};

struct SplitResult {
  Manifest manifest;
  SplitSummary summary;
};

/// Seeded Fisher-Yates shuffle; the first ceil(train_fraction * n) shuffled
/// entries become train. Entry order in the returned manifest is unchanged.
SplitResult split_manifest(const Manifest& m, double train_fraction, std::uint64_t seed);

SplitSummary summarize_split(const Manifest& m);

namespace detail {

/// Mean over the (2r+1)^2 window truncated at the borders, via a summed-area table.
template <typename Scalar>
Plane<Scalar> box_mean(const Plane<Scalar>& in, Index radius) {
  const Index h = in.rows();
  const Index w = in.cols();
  Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> sat =
      Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(h + 1, w + 1);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c)
      sat(r + 1, c + 1) = static_cast<double>(in(r, c)) + sat(r, c + 1) + sat(r + 1, c) - sat(r, c);
  Plane<Scalar> out(h, w);
  for (Index r = 0; r < h; ++r) {
    const Index r0 = std::max<Index>(0, r - radius);
    const Index r1 = std::min<Index>(h, r + radius + 1);
    for (Index c = 0; c < w; ++c) {
      const Index c0 = std::max<Index>(0, c - radius);
      const Index c1 = std::min<Index>(w, c + radius + 1);
      const double sum = sat(r1, c1) - sat(r0, c1) - sat(r1, c0) + sat(r0, c0);
      out(r, c) = static_cast<Scalar>(sum / static_cast<double>((r1 - r0) * (c1 - c0)));
    }
  }
  return out;
}

}  // namespace detail

template <typename Scalar>
struct SyntheticPair {
  ImageGrid<Scalar> observed;
  AtmosphericLightMap<Scalar> light;
  TransmissionMap<Scalar> transmission;
};

inline constexpr std::uint64_t kTransmissionStreamSalt = 0x7472616E736D6974ULL;  // "transmit"

/// Smooth random transmission: uniform noise on [t_min, 1] (counter-based
/// stream `seed` xor kTransmissionStreamSalt), box-averaged with the given
/// radius, re-clamped.
template <typename Scalar = double>
TransmissionMap<Scalar> synth_transmission(Index h, Index w, Index radius, std::uint64_t seed,
                                           Scalar t_min = Scalar(kDefaultTMin)) {
  detail::require_domain(radius >= 0, "synth_transmission: radius must be nonnegative");
  Plane<Scalar> noise(h, w);
  const double lo = static_cast<double>(t_min);
  for (Index p = 0; p < h * w; ++p)
    noise.data()[p] = static_cast<Scalar>(lo + (1.0 - lo) * counter_uniform(seed ^ kTransmissionStreamSalt, static_cast<std::uint64_t>(p)));
  return TransmissionMap<Scalar>::clamped(detail::box_mean(noise, radius), t_min);
}

/// Low-light training triple from a bright source: A from the point-wise
/// light model, t a smooth random field, I = degrade(J, t, A).
template <typename Scalar>
SyntheticPair<Scalar> synthesize_pair(const ImageGrid<Scalar>& bright, const ScatterParams& params,
                                      Index t_smoothness, std::uint64_t seed, Scalar t_min = Scalar(kDefaultTMin)) {
  auto light = synth_atmospheric_light<Scalar>(bright.height(), bright.width(), params);
  auto transmission = synth_transmission<Scalar>(bright.height(), bright.width(), t_smoothness, seed, t_min);
  auto observed = degrade(bright, transmission, light);
  return {std::move(observed), std::move(light), std::move(transmission)};
}

}  // namespace lowlight
