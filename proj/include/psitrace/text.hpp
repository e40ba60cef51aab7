#pragma once

#include <string>
#include <string_view>

#include "psitrace/common.hpp"

namespace psitrace {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Recursive-descent helper over a single line of text.
class TextCursor {
 public:
  explicit TextCursor(std::string_view text) : text_(text) {}

  void skip_ws();
  bool at_end();
  char peek();
  /// Consumes `c` if it is next (after whitespace).
  bool accept(char c);
  bool accept(std::string_view word);
  void expect(char c);
  void expect(std::string_view word);
  int parse_int();
  double parse_real();
  /// real or (re, im)
  cplx parse_complex();
  std::string parse_ident();
  size_t position() const { return pos_; }
  [[noreturn]] void fail(const std::string& what) const;

 private:
  std::string_view text_;
  size_t pos_ = 0;
};

/// %.17g, round-trips exactly through strtod.
std::string format_real(double v);
/// "re" when imaginary part is zero, else "(re,im)".
std::string format_complex_text(cplx z);

}  // namespace psitrace
