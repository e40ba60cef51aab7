#pragma once

#include <optional>
#include <string>

#include "psitrace/symcore.hpp"
#include "psitrace/text.hpp"

namespace psitrace {

// Plain-text symbol grammar (whitespace is free):
//
//   series     := "{" [ entry { ";" entry } ] "}"      entry := int{","int} ":" complex
//   term       := series "xi^(" int{","int} ")" "r^(" complex ")"
//   homogeneous:= "0" | term { "+" term }
//   symbol     := "symbol" "(" "n" "=" int "," "m" "=" complex ")"
//                 "{" [ component { ";" component } ] "}"
//   component  := "cutoff" real ":" homogeneous
//   complex    := real | "(" real "," real ")"
//
// r stands for |xi|; a cutoff of 0 means none. Reals are written with 17
// significant digits so text round-trips exactly.

std::string to_text(const TorusSeries& g);
std::string to_text(const HomogeneousSymbol& h);
std::string to_text(const PolyHomogeneousSymbol& a);

TorusSeries parse_series(TextCursor& in, int dim);
/// `degree` is required only to type the zero symbol; otherwise it is inferred and checked.
HomogeneousSymbol parse_homogeneous(TextCursor& in, int dim, std::optional<cplx> degree = {});
PolyHomogeneousSymbol parse_symbol(TextCursor& in);

HomogeneousSymbol parse_homogeneous(const std::string& text, int dim, std::optional<cplx> degree = {});
PolyHomogeneousSymbol parse_symbol(const std::string& text);

}  // namespace psitrace
