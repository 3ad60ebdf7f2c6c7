#include <cmath>
#include <regex>

#include "check_errc.hpp"
#include "doctest.h"
#include "mixlab/rewards.hpp"
#include "mixlab/rng.hpp"
#include "oracles.hpp"

using namespace mixlab;

namespace {

std::optional<std::string> regex_oracle(const std::string& s) {
  static const std::regex re(R"(<think>[\s\S]*?</think>\s*<answer>([\s\S]*?)</answer>)");
  std::optional<std::string> last;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
    last = (*it)[1].str();
  }
  if (!last) return std::nullopt;
  const auto b = last->find_first_not_of(" \t\n\r\f\v");
  if (b == std::string::npos) return std::string();
  const auto e = last->find_last_not_of(" \t\n\r\f\v");
  return last->substr(b, e - b + 1);
}

}  // namespace

TEST_CASE("extract_answer examples") {
  const auto a = extract_answer("<think> the diatom makes its own food </think> <answer> B </answer>", AnswerMode::Text);
  CHECK(a.format_ok);
  CHECK(a.text == "B");
  const auto none = extract_answer("The answer is B", AnswerMode::Text);
  CHECK_FALSE(none.format_ok);
  CHECK(none.text.empty());
  const auto box = extract_answer(
      "<think>the person on the left</think> <answer>[{'Position': [422, 781, 464, 926], 'Confidence': 1}]</answer>",
      AnswerMode::Box);
  REQUIRE(box.format_ok);
  REQUIRE(box.boxes.size() == 1);
  CHECK(box.boxes[0].box == BoundingBox{422, 781, 464, 926});
  CHECK(box.boxes[0].confidence == 1.0);
}

TEST_CASE("extract_answer grammar details") {
  CHECK(extract_answer("<think>a</think><answer>x</answer>", AnswerMode::Text).format_ok);
  CHECK(extract_answer("<think>a</think>\n\t <answer>x</answer>", AnswerMode::Text).format_ok);
  CHECK_FALSE(extract_answer("<THINK>a</THINK><answer>x</answer>", AnswerMode::Text).format_ok);
  CHECK_FALSE(extract_answer("<think>a</think> so <answer>x</answer>", AnswerMode::Text).format_ok);
  CHECK_FALSE(extract_answer("<answer>x</answer><think>a</think>", AnswerMode::Text).format_ok);
  CHECK_FALSE(extract_answer("<think>a</think><answer>x", AnswerMode::Text).format_ok);
  const auto last = extract_answer("<think>1</think><answer>A</answer> then <think>2</think><answer>C</answer>",
                                   AnswerMode::Text);
  CHECK(last.text == "C");
  const auto prefix = extract_answer("noise <think>a</think> <answer>  D </answer> trailing", AnswerMode::Text);
  CHECK(prefix.text == "D");
  CHECK_FALSE(extract_answer("<think>a</think><answer>B</answer>", AnswerMode::Box).format_ok);
  CHECK_FALSE(extract_answer("<think>a</think><answer>[]</answer>", AnswerMode::Box).format_ok);
  CHECK_FALSE(
      extract_answer("<think>a</think><answer>[{'Position': [5, 5, 1, 1], 'Confidence': 1}]</answer>", AnswerMode::Box)
          .format_ok);
  CHECK_FALSE(
      extract_answer("<think>a</think><answer>[{'Position': [1, 2, 3], 'Confidence': 1}]</answer>", AnswerMode::Box)
          .format_ok);
  CHECK_FALSE(
      extract_answer("<think>a</think><answer>[{'Position': [1, 2, 3, 4]}]</answer>", AnswerMode::Box).format_ok);
  const auto dq = extract_answer(
      "<think>a</think><answer>[{\"Position\": [1.5, 2, 3, 4.25], \"Confidence\": 0.5}]</answer>", AnswerMode::Box);
  REQUIRE(dq.format_ok);
  CHECK(dq.boxes[0].box == BoundingBox{1.5, 2, 3, 4.25});
}

TEST_CASE("extract_answer agrees with a regex oracle on random token soup") {
  const std::vector<std::string> tokens{"<think>", "</think>", "<answer>", "</answer>", " ", "\n", "A",
                                        "xy",      "<",        ">",        "/",         "<think", "answer>"};
  Rng rng(31);
  int matched = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    auto soup = [&](std::uint64_t max_len) {
      std::string t;
      const auto len = rng.below(max_len + 1);
      for (std::uint64_t i = 0; i < len; ++i) t += tokens[rng.below(tokens.size())];
      return t;
    };
    std::string s;
    if (trial % 2 == 0) {
      s = soup(14);
    } else {
      s = soup(2) + "<think>" + soup(3) + "</think>" + soup(2) + "<answer>" + soup(3) + "</answer>" + soup(2);
    }
    const auto expected = regex_oracle(s);
    const auto got = extract_answer(s, AnswerMode::Text);
    INFO(s);
    CHECK(got.format_ok == expected.has_value());
    if (expected) {
      CHECK(got.text == *expected);
      ++matched;
    }
  }
  CHECK(matched > 50);
}

TEST_CASE("format success is closed under whitespace padding between tags") {
  Rng rng(32);
  const char* pads[] = {"", " ", "\n", "\t \n", "   "};
  for (int trial = 0; trial < 100; ++trial) {
    const std::string s = std::string("<think>r</think>") + pads[rng.below(5)] + "<answer>" + pads[rng.below(5)] +
                          "B" + pads[rng.below(5)] + "</answer>";
    const auto got = extract_answer(s, AnswerMode::Text);
    CHECK(got.format_ok);
    CHECK(got.text == "B");
  }
}

TEST_CASE("accuracy reward") {
  CHECK(accuracy_reward(" B ", "B") == 1);
  CHECK(accuracy_reward("B", "C") == 0);
  CHECK(accuracy_reward("b", "B") == 0);
  CHECK(accuracy_reward("New   York\n", "New York") == 1);
  CHECK(normalize_answer("  a \t b  ") == "a b");
}

TEST_CASE("iou cases") {
  CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);
  CHECK(iou({0, 0, 1, 1}, {2, 2, 3, 3}) == 0.0);
  CHECK(iou({0, 0, 2, 2}, {1, 1, 3, 3}) == doctest::Approx(1.0 / 7).epsilon(1e-15));
  CHECK(iou({0, 0, 0, 0}, {0, 0, 0, 0}) == 0.0);
  CHECK(iou({0, 0, 2, 2}, {2, 0, 4, 2}) == 0.0);
  CHECK_ERRC(iou({2, 0, 1, 1}, {0, 0, 1, 1}), Errc::InvalidBox);
}

TEST_CASE("iou agrees with a pixel-count oracle and is symmetric") {
  Rng rng(33);
  for (int trial = 0; trial < 1000; ++trial) {
    int c[8];
    for (int& v : c) v = static_cast<int>(rng.below(21));
    if (c[0] > c[2]) std::swap(c[0], c[2]);
    if (c[1] > c[3]) std::swap(c[1], c[3]);
    if (c[4] > c[6]) std::swap(c[4], c[6]);
    if (c[5] > c[7]) std::swap(c[5], c[7]);
    const BoundingBox a{double(c[0]), double(c[1]), double(c[2]), double(c[3])};
    const BoundingBox b{double(c[4]), double(c[5]), double(c[6]), double(c[7])};
    const double v = iou(a, b);
    const double union_area = a.area() + b.area();
    const double resolution = union_area > 0 ? 1.0 / union_area : 0.0;
    CHECK(std::abs(v - oracle::pixel_iou(c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7])) <= resolution + 1e-12);
    CHECK(v == iou(b, a));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    if (v == 1.0) CHECK(a == b);
  }
}

TEST_CASE("multi-box predictions use the most confident box, first on ties") {
  const BoundingBox gold{0, 0, 2, 2};
  const std::vector<ScoredBox> boxes{{{0, 0, 2, 2}, 0.5}, {{1, 1, 3, 3}, 0.9}, {{10, 10, 11, 11}, 0.9}};
  CHECK(best_box_iou(boxes, gold) == doctest::Approx(1.0 / 7));
  CHECK(best_box_iou(std::vector<ScoredBox>{}, gold) == 0.0);
  const std::vector<BoundingBox> preds{{0, 0, 2, 2}, {1, 1, 3, 3}};
  const std::vector<BoundingBox> golds{{0, 0, 2, 2}, {0, 0, 2, 2}};
  CHECK(mean_iou(preds, golds) == doctest::Approx((1.0 + 1.0 / 7) / 2));
  CHECK_ERRC(mean_iou(preds, std::span(golds).first(1)), Errc::DimensionMismatch);
}

TEST_CASE("combined reward") {
  CHECK(combined_reward({1, 1, std::nullopt, 0}).total == 3.0);
  const auto failed = combined_reward({0, 1, std::nullopt, 0});
  CHECK(failed.total == 0.0);
  CHECK(failed.accuracy == 0);
  CHECK(combined_reward({0, std::nullopt, 0.7, 0}).iou == 0.0);
  CHECK(combined_reward({1, std::nullopt, 0.5, 0}).total == 2.0);
  CHECK_ERRC(combined_reward({1, 1, std::nullopt, 0}, {-1, 2, 1}), Errc::InvalidArgument);
}

TEST_CASE("combined reward is monotone in each component") {
  Rng rng(34);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = rng.uniform(), b = rng.uniform();
    const double lo = std::min(a, b), hi = std::max(a, b);
    CHECK(combined_reward({1, std::nullopt, lo, 0}).total <= combined_reward({1, std::nullopt, hi, 0}).total);
    CHECK(combined_reward({0, std::nullopt, hi, 0}).total <= combined_reward({1, std::nullopt, lo, 0}).total);
  }
  CHECK(combined_reward({1, 0, std::nullopt, 0}).total <= combined_reward({1, 1, std::nullopt, 0}).total);
}

TEST_CASE("score_output end to end") {
  CHECK(score_output("<think>x</think><answer>B</answer>", "B", AnswerMode::Text).total == 3.0);
  CHECK(score_output("<think>x</think><answer>A</answer>", "B", AnswerMode::Text).total == 1.0);
  CHECK(score_output("B", "B", AnswerMode::Text).total == 0.0);
  const auto r = score_output("<think>x</think><answer>[{'Position': [0,0,2,2], 'Confidence': 1}]</answer>",
                              "[1,1,3,3]", AnswerMode::Box);
  CHECK(r.iou == doctest::Approx(1.0 / 7));
  CHECK(r.total == doctest::Approx(1.0 + 2.0 / 7));
  CHECK(parse_gold_box("[{'Position': [1,1,3,3], 'Confidence': 1}]") == BoundingBox{1, 1, 3, 3});
  CHECK_ERRC(score_output("<think>x</think><answer>B</answer>", "junk", AnswerMode::Box), Errc::InvalidBox);
}
