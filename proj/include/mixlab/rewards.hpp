#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mixlab {

struct BoundingBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  bool valid() const noexcept { return x1 <= x2 && y1 <= y2; }
  double area() const noexcept { return (x2 - x1) * (y2 - y1); }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct ScoredBox {
  BoundingBox box;
  double confidence = 0.0;
};

enum class AnswerMode { Text, Box };

struct ExtractedAnswer {
  bool format_ok = false;
  std::string text;              // trimmed answer span
  std::vector<ScoredBox> boxes;  // box mode only
};

/// Matches `<think>...</think>` + optional whitespace + `<answer>...</answer>`
/// anywhere in the output, last non-overlapping match wins. Tags are
/// case-sensitive. In box mode the answer must also parse as a list of
/// {Position: [x1, y1, x2, y2], Confidence: number} objects (single or
/// double quoted keys). Never throws.
ExtractedAnswer extract_answer(std::string_view output, AnswerMode mode) noexcept;

/// Parses a box-list payload; nullopt when malformed.
std::optional<std::vector<ScoredBox>> parse_box_list(std::string_view payload);

/// Parses a gold box given as `[x1, y1, x2, y2]` or as a one-element box list.
std::optional<BoundingBox> parse_gold_box(std::string_view payload);

/// Trim, then collapse internal whitespace runs to one space.
std::string normalize_answer(std::string_view s);

/// 1 iff the normalized strings are equal (case-sensitive).
int accuracy_reward(std::string_view predicted, std::string_view gold);

/// Intersection over union; 0 when the union has zero area.
double iou(const BoundingBox& a, const BoundingBox& b);

/// IoU of the highest-confidence prediction (first listed on ties).
double best_box_iou(std::span<const ScoredBox> predicted, const BoundingBox& gold);

double mean_iou(std::span<const BoundingBox> predicted, std::span<const BoundingBox> gold);

struct RewardWeights {
  double accuracy = 2.0;
  double iou = 2.0;
  double format = 1.0;
};

struct RewardBreakdown {
  int format = 0;
  std::optional<int> accuracy;  // text tasks
  std::optional<double> iou;    // box tasks
  double total = 0.0;
};

/// Fills `total`; a format failure zeroes every component first.
RewardBreakdown combined_reward(RewardBreakdown parts, const RewardWeights& weights = {});

/// Full reward of one model output against its gold answer.
RewardBreakdown score_output(std::string_view output, std::string_view gold, AnswerMode mode,
                             const RewardWeights& weights = {});

}  // namespace mixlab
