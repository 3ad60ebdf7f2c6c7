#include "mixlab/rewards.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "json.hpp"

#include "mixlab/error.hpp"

namespace mixlab {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

struct TagMatch {
  std::size_t end = 0;
  std::string_view answer;
};

// Leftmost match of the tag grammar starting exactly at `start`, with lazy
// bodies: the first </think> that is followed by whitespace and <answer>,
// then the first </answer> after that.
std::optional<TagMatch> match_at(std::string_view s, std::size_t start) {
  std::size_t close = s.find(kThinkClose, start + kThinkOpen.size());
  while (close != std::string_view::npos) {
    std::size_t pos = close + kThinkClose.size();
    while (pos < s.size() && is_space(s[pos])) ++pos;
    if (s.compare(pos, kAnswerOpen.size(), kAnswerOpen) == 0) {
      const std::size_t body = pos + kAnswerOpen.size();
      const std::size_t end = s.find(kAnswerClose, body);
      if (end == std::string_view::npos) return std::nullopt;
      return TagMatch{end + kAnswerClose.size(), s.substr(body, end - body)};
    }
    close = s.find(kThinkClose, close + 1);
  }
  return std::nullopt;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::optional<nlohmann::json> parse_loose_json(std::string_view payload) {
  std::string text(payload);
  std::replace(text.begin(), text.end(), '\'', '"');
  auto j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

std::optional<BoundingBox> box_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) return std::nullopt;
  double v[4];
  for (std::size_t i = 0; i < 4; ++i) {
    if (!j[i].is_number()) return std::nullopt;
    v[i] = j[i].get<double>();
    if (!std::isfinite(v[i])) return std::nullopt;
  }
  BoundingBox box{v[0], v[1], v[2], v[3]};
  if (!box.valid()) return std::nullopt;
  return box;
}

}  // namespace

std::optional<std::vector<ScoredBox>> parse_box_list(std::string_view payload) {
  const auto j = parse_loose_json(trim(payload));
  if (!j || !j->is_array() || j->empty()) return std::nullopt;
  std::vector<ScoredBox> boxes;
  for (const auto& item : *j) {
    if (!item.is_object()) return std::nullopt;
    const auto pos = item.find("Position");
    const auto conf = item.find("Confidence");
    if (pos == item.end() || conf == item.end() || !conf->is_number()) return std::nullopt;
    auto box = box_from_json(*pos);
    if (!box) return std::nullopt;
    boxes.push_back({*box, conf->get<double>()});
  }
  return boxes;
}

std::optional<BoundingBox> parse_gold_box(std::string_view payload) {
  const auto j = parse_loose_json(trim(payload));
  if (!j) return std::nullopt;
  if (auto box = box_from_json(*j)) return box;
  if (auto list = parse_box_list(payload); list && list->size() == 1) return list->front().box;
  return std::nullopt;
}

ExtractedAnswer extract_answer(std::string_view output, AnswerMode mode) noexcept {
  ExtractedAnswer result;
  try {
    std::optional<TagMatch> last;
    std::size_t from = 0;
    while (true) {
      const std::size_t open = output.find(kThinkOpen, from);
      if (open == std::string_view::npos) break;
      if (auto m = match_at(output, open)) {
        last = m;
        from = m->end;
      } else {
        from = open + 1;
      }
    }
    if (!last) return result;
    const auto answer = trim(last->answer);
    if (mode == AnswerMode::Box) {
      auto boxes = parse_box_list(answer);
      if (!boxes) return result;
      result.boxes = std::move(*boxes);
    }
    result.format_ok = true;
    result.text = std::string(answer);
  } catch (...) {
    return ExtractedAnswer{};
  }
  return result;
}

std::string normalize_answer(std::string_view s) {
  s = trim(s);
  std::string out;
  out.reserve(s.size());
  bool in_space = false;
  for (char c : s) {
    if (is_space(c)) {
      in_space = true;
      continue;
    }
    if (in_space) out += ' ';
    in_space = false;
    out += c;
  }
  return out;
}

int accuracy_reward(std::string_view predicted, std::string_view gold) {
  return normalize_answer(predicted) == normalize_answer(gold) ? 1 : 0;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  if (!a.valid() || !b.valid()) throw Error(Errc::InvalidBox, "box corners out of order");
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double best_box_iou(std::span<const ScoredBox> predicted, const BoundingBox& gold) {
  if (predicted.empty()) return 0.0;
  const ScoredBox* best = &predicted.front();
  for (const auto& p : predicted) {
    if (p.confidence > best->confidence) best = &p;
  }
  return iou(best->box, gold);
}

double mean_iou(std::span<const BoundingBox> predicted, std::span<const BoundingBox> gold) {
  if (predicted.size() != gold.size()) throw Error(Errc::DimensionMismatch, "mean_iou needs paired boxes");
  if (predicted.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) sum += iou(predicted[i], gold[i]);
  return sum / static_cast<double>(predicted.size());
}

RewardBreakdown combined_reward(RewardBreakdown parts, const RewardWeights& weights) {
  if (weights.accuracy < 0.0 || weights.iou < 0.0 || weights.format < 0.0) {
    throw Error(Errc::InvalidArgument, "reward weights must be >= 0");
  }
  if (parts.format == 0) {
    if (parts.accuracy) parts.accuracy = 0;
    if (parts.iou) parts.iou = 0.0;
    parts.total = 0.0;
    return parts;
  }
  parts.format = 1;
  double total = weights.format;
  if (parts.accuracy) total += weights.accuracy * *parts.accuracy;
  if (parts.iou) total += weights.iou * *parts.iou;
  parts.total = total;
  return parts;
}

RewardBreakdown score_output(std::string_view output, std::string_view gold, AnswerMode mode,
                             const RewardWeights& weights) {
  const auto extracted = extract_answer(output, mode);
  RewardBreakdown parts;
  parts.format = extracted.format_ok ? 1 : 0;
  if (mode == AnswerMode::Text) {
    parts.accuracy = extracted.format_ok ? accuracy_reward(extracted.text, gold) : 0;
  } else {
    const auto gold_box = parse_gold_box(gold);
    if (!gold_box) throw Error(Errc::InvalidBox, "gold box is malformed: " + std::string(gold));
    parts.iou = extracted.format_ok ? best_box_iou(extracted.boxes, *gold_box) : 0.0;
  }
  return combined_reward(parts, weights);
}

}  // namespace mixlab
