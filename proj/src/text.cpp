#include "psitrace/text.hpp"

#include <cctype>
#include <cstdlib>

namespace psitrace {

void TextCursor::skip_ws() {
  while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
}

bool TextCursor::at_end() {
  skip_ws();
  return pos_ >= text_.size();
}

char TextCursor::peek() {
  skip_ws();
  return pos_ < text_.size() ? text_[pos_] : '\0';
}

bool TextCursor::accept(char c) {
  if (peek() == c) {
    ++pos_;
    return true;
  }
  return false;
}

bool TextCursor::accept(std::string_view word) {
  skip_ws();
  if (text_.substr(pos_, word.size()) != word) return false;
  size_t end = pos_ + word.size();
  // identifiers must not run on into a longer name
  if (std::isalpha(static_cast<unsigned char>(word.back())) && end < text_.size() &&
      (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_')) {
    return false;
  }
  pos_ = end;
  return true;
}

void TextCursor::expect(char c) {
  if (!accept(c)) fail(std::string("expected '") + c + "'");
}

void TextCursor::expect(std::string_view word) {
  if (!accept(word)) fail("expected '" + std::string(word) + "'");
}

int TextCursor::parse_int() {
  skip_ws();
  std::string buf(text_.substr(pos_, 32));
  char* end = nullptr;
  long v = std::strtol(buf.c_str(), &end, 10);
  if (end == buf.c_str()) fail("expected integer");
  pos_ += static_cast<size_t>(end - buf.c_str());
  return static_cast<int>(v);
}

double TextCursor::parse_real() {
  skip_ws();
  std::string buf(text_.substr(pos_, 64));
  char* end = nullptr;
  double v = std::strtod(buf.c_str(), &end);
  if (end == buf.c_str()) fail("expected number");
  pos_ += static_cast<size_t>(end - buf.c_str());
  return v;
}

cplx TextCursor::parse_complex() {
  if (accept('(')) {
    double re = parse_real();
    expect(',');
    double im = parse_real();
    expect(')');
    return {re, im};
  }
  return parse_real();
}

std::string TextCursor::parse_ident() {
  skip_ws();
  size_t start = pos_;
  while (pos_ < text_.size() &&
         (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
    ++pos_;
  }
  if (start == pos_) fail("expected identifier");
  return std::string(text_.substr(start, pos_ - start));
}

void TextCursor::fail(const std::string& what) const {
  throw ParseError(what + " at column " + std::to_string(pos_ + 1) + " in '" + std::string(text_) + "'");
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_complex_text(cplx z) {
  if (z.imag() == 0.0) return format_real(z.real());
  return "(" + format_real(z.real()) + "," + format_real(z.imag()) + ")";
}

}  // namespace psitrace
