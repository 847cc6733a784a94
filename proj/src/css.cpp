// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathclip/css.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>

#include "pathclip/error.hpp"

namespace pathclip {

namespace {

class CssParser {
 public:
  CssParser(std::string_view text, const CssOptions& options) : text_(text), options_(options) {}

  PathClipPrimitive parse() {
    const std::size_t open = text_.find('[');
    if (open == std::string_view::npos) {
      if (text_.find(']') != std::string_view::npos) {
        fail(ErrorCode::kUnbalancedBrackets, "']' without matching '['", text_.find(']'));
      }
      fail(ErrorCode::kMissingField, "no declaration block '[...]' found", text_.size());
    }
    PathClipPrimitive primitive;
    const std::string name(text_.substr(0, open));
    try {
      primitive.appearance = AppearanceDescription::from_text(name, options_.max_tokens);
    } catch (Error& e) {
      e.at_offset(0);
      throw;
    }

    pos_ = open + 1;
    std::optional<double> cx, cy, w, h;
    std::optional<std::vector<Point>> points;
    skip_ws();
    if (peek() == ']') fail(ErrorCode::kMissingField, "empty declaration block", pos_);
    while (true) {
      skip_ws();
      if (at_end()) fail(ErrorCode::kUnbalancedBrackets, "missing closing ']'", pos_);
      const std::size_t name_at = pos_;
      const std::string field = read_field_name();
      skip_ws();
      expect(':');
      if (field == "cx") {
        assign_once(cx, read_px(), field, name_at);
      } else if (field == "cy") {
        assign_once(cy, read_px(), field, name_at);
      } else if (field == "w") {
        assign_once(w, read_px(), field, name_at);
      } else if (field == "h") {
        assign_once(h, read_px(), field, name_at);
      } else if (field == "clip-path") {
        if (points) fail(ErrorCode::kUnexpectedToken, "duplicate field 'clip-path'", name_at);
        points = read_polygon();
      } else {
        fail(ErrorCode::kUnexpectedToken, "unknown field '" + field + "'", name_at);
      }
      skip_ws();
      if (at_end()) fail(ErrorCode::kUnbalancedBrackets, "missing closing ']'", pos_);
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() == ']') {
        ++pos_;
        break;
      }
      fail(ErrorCode::kUnexpectedToken, std::string("expected ',' or ']' but found '") + peek() + "'",
           pos_);
    }
    skip_ws();
    if (!at_end()) {
      const ErrorCode code = (peek() == ']' || peek() == '[' || peek() == ')')
                                 ? ErrorCode::kUnbalancedBrackets
                                 : ErrorCode::kUnexpectedToken;
      fail(code, "trailing characters after ']'", pos_);
    }

    const std::size_t end = text_.size();
    if (!cx) fail(ErrorCode::kMissingField, "field 'cx' is missing", end);
    if (!cy) fail(ErrorCode::kMissingField, "field 'cy' is missing", end);
    if (!w) fail(ErrorCode::kMissingField, "field 'w' is missing", end);
    if (!h) fail(ErrorCode::kMissingField, "field 'h' is missing", end);
    if (!points) fail(ErrorCode::kMissingField, "field 'clip-path' is missing", end);

    try {
      primitive.path = PathParams::from_points(std::move(*points), options_.max_vertices);
    } catch (Error& e) {
      e.at_offset(polygon_at_);
      throw;
    }
    return primitive;
  }

 private:
  [[noreturn]] void fail(ErrorCode code, const std::string& message, std::size_t offset) const {
    Error error(code, message + " (at byte " + std::to_string(offset) + ")");
    error.at_offset(offset);
    throw error;
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    skip_ws();
    if (at_end()) {
      fail(ErrorCode::kUnbalancedBrackets, std::string("unexpected end of input, expected '") + c + "'",
           pos_);
    }
    if (peek() != c) {
      fail(ErrorCode::kUnexpectedToken, std::string("expected '") + c + "' but found '" + peek() + "'",
           pos_);
    }
    ++pos_;
  }

  std::string read_word() {
    std::string word;
    while (!at_end() && (std::isalpha(static_cast<unsigned char>(peek())) || peek() == '-')) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(peek())));
      ++pos_;
    }
    return word;
  }

  std::string read_field_name() {
    const std::size_t at = pos_;
    std::string word = read_word();
    if (word.empty()) {
      if (peek() == ']' || peek() == ')') fail(ErrorCode::kUnbalancedBrackets, "unexpected bracket", at);
      fail(ErrorCode::kUnexpectedToken, "expected a field name", at);
    }
    if (word == "clip") {
      // "clip path" spelling.
      const std::size_t save = pos_;
      skip_ws();
      if (read_word() == "path") return "clip-path";
      pos_ = save;
    }
    return word;
  }

  double read_number() {
    skip_ws();
    const std::size_t start = pos_;
    std::size_t i = pos_;
    if (i < text_.size() && (text_[i] == '+' || text_[i] == '-')) ++i;
    const std::size_t digits_start = i;
    while (i < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[i])) || text_[i] == '.')) ++i;
    if (i < text_.size() && (text_[i] == 'e' || text_[i] == 'E')) {
      std::size_t j = i + 1;
      if (j < text_.size() && (text_[j] == '+' || text_[j] == '-')) ++j;
      if (j < text_.size() && std::isdigit(static_cast<unsigned char>(text_[j]))) {
        i = j;
        while (i < text_.size() && std::isdigit(static_cast<unsigned char>(text_[i]))) ++i;
      }
    }
    if (i == digits_start) fail(ErrorCode::kMalformedNumber, "expected a number", start);
    std::string_view token = text_.substr(start, i - start);
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) {
      fail(ErrorCode::kMalformedNumber, "malformed number '" + std::string(token) + "'", start);
    }
    pos_ = i;
    return value;
  }

  double read_px() {
    const double value = read_number();
    if (text_.substr(pos_, 2) != "px") {
      fail(ErrorCode::kMalformedNumber, "number must carry a 'px' suffix", pos_);
    }
    pos_ += 2;
    if (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.')) {
      fail(ErrorCode::kMalformedNumber, "unexpected characters after 'px'", pos_);
    }
    return value;
  }

  std::vector<Point> read_polygon() {
    skip_ws();
    polygon_at_ = pos_;
    const std::size_t at = pos_;
    if (read_word() != "polygon") fail(ErrorCode::kUnexpectedToken, "expected 'polygon('", at);
    expect('(');
    std::vector<Point> points;
    while (true) {
      Point p;
      p.x = read_px();
      p.y = read_px();
      points.push_back(p);
      skip_ws();
      if (at_end()) fail(ErrorCode::kUnbalancedBrackets, "missing closing ')'", pos_);
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() == ')') {
        ++pos_;
        break;
      }
      if (peek() == ']') fail(ErrorCode::kUnbalancedBrackets, "missing closing ')' before ']'", pos_);
      fail(ErrorCode::kUnexpectedToken, "expected ',' or ')' in polygon", pos_);
    }
    return points;
  }

  void assign_once(std::optional<double>& slot, double value, const std::string& field, std::size_t at) {
    if (slot) fail(ErrorCode::kUnexpectedToken, "duplicate field '" + field + "'", at);
    slot = value;
  }

  std::string_view text_;
  CssOptions options_;
  std::size_t pos_ = 0;
  std::size_t polygon_at_ = 0;
};

}  // namespace

PathClipPrimitive parse_css(std::string_view text, const CssOptions& options) {
  return CssParser(text, options).parse();
}

std::string format_px(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  std::string out(buf);
  if (out == "-0.00") out = "0.00";
  return out;
}

std::string serialize_css(const PathClipPrimitive& primitive) {
  const Box& box = primitive.path.box;
  std::string out = primitive.appearance.text();
  out += " [cx: " + format_px(box.cx) + "px, cy: " + format_px(box.cy) + "px, w: " + format_px(box.w) +
         "px, h: " + format_px(box.h) + "px, clip-path: polygon(";
  bool first = true;
  for (const auto& p : primitive.path.clip_points) {
    if (!first) out += ", ";
    first = false;
    out += format_px(p.x) + "px " + format_px(p.y) + "px";
  }
  out += ")]";
  return out;
}

}  // namespace pathclip
