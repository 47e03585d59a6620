#include "lowlight/dataset.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "lowlight/numeric.hpp"

namespace lowlight {

using nlohmann::json;

void BoundingBox::validate() const {
  detail::require_domain(x >= 0 && y >= 0, "BoundingBox: negative origin");
  detail::require_domain(w >= 1 && h >= 1, "BoundingBox: extent must be at least one pixel");
}

std::optional<BoundingBox> box_intersection(const BoundingBox& a, const BoundingBox& b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.x + a.w, b.x + b.w);
  const int y1 = std::min(a.y + a.h, b.y + b.h);
  if (x1 <= x0 || y1 <= y0) return std::nullopt;
  return BoundingBox{x0, y0, x1 - x0, y1 - y0};
}

double box_iou(const BoundingBox& a, const BoundingBox& b) {
  a.validate();
  b.validate();
  const auto inter = box_intersection(a, b);
  const long long i = inter ? inter->area() : 0;
  return static_cast<double>(i) / static_cast<double>(a.area() + b.area() - i);
}

Mask box_mask(const BoundingBox& box, Index height, Index width) {
  detail::require_dims(box.fits(height, width), "box_mask: box exceeds image bounds");
  Mask m = Mask::Zero(height, width);
  m.block(box.y, box.x, box.h, box.w).setConstant(true);
  return m;
}

ConsensusOutcome consensus_region(std::span<const BoundingBox> boxes, double threshold) {
  if (boxes.size() < 2)
    throw InsufficientAnnotationsError("consensus_region: need at least two annotator boxes");
  ConsensusOutcome out;
  out.min_pairwise_iou = 1.0;
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j)
      out.min_pairwise_iou = std::min(out.min_pairwise_iou, box_iou(boxes[i], boxes[j]));
  if (!(out.min_pairwise_iou > threshold)) return out;

  std::optional<BoundingBox> region = boxes[0];
  for (std::size_t i = 1; i < boxes.size() && region; ++i) region = box_intersection(*region, boxes[i]);
  out.region = region;
  return out;
}

std::vector<ConsensusOutcome> apply_consensus(AnnotationRecord& record, Index height, Index width,
                                              double threshold) {
  if (record.annotator_boxes.size() < 2)
    throw InsufficientAnnotationsError("apply_consensus: record '" + record.image_id +
                                       "' has fewer than two annotators");
  const std::size_t objects = record.annotator_boxes.front().boxes.size();
  for (const auto& a : record.annotator_boxes)
    detail::require_dims(a.boxes.size() == objects,
                         "apply_consensus: annotators of '" + record.image_id + "' disagree on object count");

  std::vector<ConsensusOutcome> outcomes;
  Mask merged = Mask::Zero(height, width);
  bool any = false;
  std::vector<BoundingBox> boxes(record.annotator_boxes.size());
  for (std::size_t k = 0; k < objects; ++k) {
    for (std::size_t a = 0; a < boxes.size(); ++a) {
      boxes[a] = record.annotator_boxes[a].boxes[k];
      detail::require_dims(boxes[a].fits(height, width), "apply_consensus: box exceeds image bounds");
    }
    outcomes.push_back(consensus_region(boxes, threshold));
    if (outcomes.back().accepted()) {
      merged = merged || box_mask(*outcomes.back().region, height, width);
      any = true;
    }
  }
  record.consensus = any ? std::optional<Mask>(std::move(merged)) : std::nullopt;
  return outcomes;
}

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

std::string_view to_string(Stage s) { return s == Stage::stage1_7to9pm ? "stage1_7to9pm" : "stage2_9to11pm"; }

std::string_view to_string(ObjectType t) {
  switch (t) {
    case ObjectType::single_person:
      return "single_person";
    case ObjectType::multiple_persons:
      return "multiple_persons";
    case ObjectType::vehicle:
      return "vehicle";
  }
  return "";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw DomainError("manifest: unknown split '" + std::string(s) + "'");
}

Stage parse_stage(std::string_view s) {
  if (s == "stage1_7to9pm") return Stage::stage1_7to9pm;
  if (s == "stage2_9to11pm") return Stage::stage2_9to11pm;
  throw DomainError("manifest: unknown stage '" + std::string(s) + "'");
}

ObjectType parse_object_type(std::string_view s) {
  if (s == "single_person") return ObjectType::single_person;
  if (s == "multiple_persons") return ObjectType::multiple_persons;
  if (s == "vehicle") return ObjectType::vehicle;
  throw DomainError("manifest: unknown object_type '" + std::string(s) + "'");
}

void Manifest::validate() const {
  std::set<std::string_view> images;
  std::set<std::string_view> gts;
  for (const auto& e : entries) {
    if (!images.insert(e.image).second) throw DomainError("manifest: duplicate image path '" + e.image + "'");
    if (!gts.insert(e.gt).second) throw DomainError("manifest: duplicate gt path '" + e.gt + "'");
  }
}

namespace {

const std::string& require_string(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_string())
    throw DomainError(std::string("manifest: entry lacks string field '") + key + "'");
  return it->get_ref<const std::string&>();
}

}  // namespace

Manifest parse_manifest(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DomainError(std::string("manifest: invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw DomainError("manifest: top level must be an array");
  Manifest m;
  for (const auto& obj : doc) {
    if (!obj.is_object()) throw DomainError("manifest: entries must be objects");
    m.entries.push_back({require_string(obj, "image"), require_string(obj, "gt"),
                         parse_split(require_string(obj, "split")), parse_stage(require_string(obj, "stage")),
                         parse_object_type(require_string(obj, "object_type"))});
  }
  m.validate();
  return m;
}

std::string manifest_to_json(const Manifest& m) {
  json doc = json::array();
  for (const auto& e : m.entries) {
    doc.push_back({{"image", e.image},
                   {"gt", e.gt},
                   {"split", to_string(e.split)},
                   {"stage", to_string(e.stage)},
                   {"object_type", to_string(e.object_type)}});
  }
  return doc.dump(2) + "\n";
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_manifest(text.str());
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  m.validate();
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << manifest_to_json(m);
    if (!out.flush()) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

SplitSummary summarize_split(const Manifest& m) {
  SplitSummary s;
  for (const auto& e : m.entries) {
    auto bump = [&e](SplitCounts& c) { ++(e.split == Split::train ? c.train : c.test); };
    bump(s.total);
    bump(s.by_stage[e.stage]);
    bump(s.by_object_type[e.object_type]);
  }
  return s;
}

SplitResult split_manifest(const Manifest& m, double train_fraction, std::uint64_t seed) {
  detail::require_domain(train_fraction > 0.0 && train_fraction < 1.0,
                         "split_manifest: train_fraction must lie in (0, 1)");
  m.validate();
  const std::size_t n = m.entries.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  const std::size_t n_train = std::min(n, ceil_count(train_fraction, n));
  SplitResult result{m, {}};
  for (std::size_t i = 0; i < n; ++i) result.manifest.entries[order[i]].split = i < n_train ? Split::train : Split::test;
  result.summary = summarize_split(result.manifest);
  return result;
}

}  // namespace lowlight
