#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "polynomial.hpp"

namespace ptf {

// One term per line: "<coeff> <i1> ... <ik>" with 1-based indices; '#' starts a comment.
inline Polynomial parse_polynomial(const std::string& text, int max_degree = 64) {
  Polynomial p;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tok;
    std::vector<std::string> toks;
    while (ls >> tok) toks.push_back(tok);
    if (toks.empty()) continue;
    auto fail = [&](const std::string& why) {
      return InputError("line " + std::to_string(lineno) + ": " + why + " in \"" + line + "\"");
    };
    double c;
    std::size_t used = 0;
    try {
      c = std::stod(toks[0], &used);
    } catch (const std::exception&) {
      throw fail("bad coefficient");
    }
    if (used != toks[0].size() || !std::isfinite(c)) throw fail("bad coefficient");
    Index mono;
    for (std::size_t t = 1; t < toks.size(); ++t) {
      long long v;
      try {
        v = std::stoll(toks[t], &used);
      } catch (const std::exception&) {
        throw fail("bad variable index");
      }
      if (used != toks[t].size()) throw fail("bad variable index");
      if (v < 1) throw fail("variable index must be >= 1");
      if (v > (1 << 24)) throw fail("variable index too large");
      mono.push_back(static_cast<int>(v - 1));
    }
    if (static_cast<int>(mono.size()) > max_degree) throw fail("degree over cap " + std::to_string(max_degree));
    p.add(mono, c);
  }
  return p;
}

inline Polynomial read_polynomial_file(const std::string& path, int max_degree = 64) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_polynomial(ss.str(), max_degree);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace ptf
