#pragma once

#include <filesystem>
#include <iosfwd>

#include "pscv/peers.hpp"

namespace pscv {

// Model text format, version 1. Whitespace-separated, one item per line:
//
//   pscv-model 1
//   classes <C> features <D> peers <n>
//   partition <t_head> <t_body> <group letter of class 0..C-1, e.g. HHBBTT>
//   then per peer i = 0..n-1:
//   peer <i>
//   subset <k> <class id>...
//   counts <training count per subset class>...
//   loss ce | focal <gamma> | ldam <s> [<C>] | cb <beta>
//   alpha <alpha>
//   hidden <h>                       (0 = linear head)
//   [h lines of D weights, then: hidden_bias <h values>]   when h > 0
//   weights <k> <cols>               (cols = h if h > 0, else D)
//   <k lines of cols weights, row-major>
//   bias <k values>
//   end
//
// Doubles use the shortest form that round-trips exactly.

void write_ensemble(const Ensemble& ensemble, std::ostream& out);
void save_ensemble(const Ensemble& ensemble, const std::filesystem::path& path);

/// Throws ParseError with the 1-based line number on malformed input.
Ensemble read_ensemble(std::istream& in);
Ensemble load_ensemble(const std::filesystem::path& path);

}  // namespace pscv
