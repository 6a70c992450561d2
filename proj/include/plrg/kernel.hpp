#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <sstream>

#include "plrg/torus.hpp"

namespace plrg {

// Sparse multi-argument kernel on a torus. With translation_invariant set, each entry
// stands for its whole translation class and is stored with its first argument
// moved to the origin.
struct Kernel {
  int arity = 0;
  Grid grid;
  bool translation_invariant = false;
  std::map<std::vector<Site>, cplx> entries;
};

inline std::vector<Site> canonical_args(std::vector<Site> args, const Grid& g, bool ti) {
  Site base = args.front();
  for (auto& x : args)
    for (int a = 0; a < 4; ++a) x[a] = wrap(ti ? x[a] - base[a] : x[a], g.ext[a]);
  return args;
}

inline void add_entry(Kernel& K, std::vector<Site> args, cplx value) {
  if (int(args.size()) != K.arity) throw ConfigError("kernel entry has the wrong number of arguments");
  K.entries[canonical_args(std::move(args), K.grid, K.translation_invariant)] += value;
}

// Average over all argument permutations.
inline Kernel symmetrize(const Kernel& K) {
  Kernel out{K.arity, K.grid, K.translation_invariant, {}};
  std::vector<int> perm(std::size_t(K.arity));
  double count = 1.0;
  for (int i = 2; i <= K.arity; ++i) count *= i;
  for (const auto& [args, val] : K.entries) {
    for (int i = 0; i < K.arity; ++i) perm[std::size_t(i)] = i;
    // coinciding arguments give repeated tuples; weigh each distinct one by its multiplicity
    std::map<std::vector<Site>, int> mult;
    do {
      std::vector<Site> p(args.size());
      for (std::size_t i = 0; i < args.size(); ++i) p[i] = args[std::size_t(perm[i])];
      ++mult[canonical_args(std::move(p), K.grid, K.translation_invariant)];
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (const auto& [p, c] : mult) add_entry(out, p, val * (c / count));
  }
  return out;
}

// One entry per line: arity site tuples "t x y z" followed by "re im". '#' starts a comment.
// The result is permutation-symmetrized.
inline Kernel read_kernel(std::istream& in, const Grid& g, bool translation_invariant) {
  Kernel K;
  K.grid = g;
  K.translation_invariant = translation_invariant;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto c = line.find('#'); c != std::string::npos) line.erase(c);
    std::istringstream ss(line);
    std::vector<double> nums;
    double x;
    while (ss >> x) nums.push_back(x);
    if (!ss.eof()) throw ConfigError("kernel line " + std::to_string(lineno) + ": not a number");
    if (nums.empty()) continue;
    if (nums.size() < 6 || (nums.size() - 2) % 4 != 0)
      throw ConfigError("kernel line " + std::to_string(lineno) + ": expected 4*arity site coordinates and re im");
    const int arity = int((nums.size() - 2) / 4);
    if (K.arity == 0) K.arity = arity;
    if (arity != K.arity) throw ConfigError("kernel line " + std::to_string(lineno) + ": arity changed");
    std::vector<Site> args(static_cast<std::size_t>(arity));
    for (int j = 0; j < arity; ++j)
      for (int a = 0; a < 4; ++a) {
        const double v = nums[std::size_t(4 * j + a)];
        if (v != std::floor(v)) throw ConfigError("kernel line " + std::to_string(lineno) + ": non-integer site");
        args[std::size_t(j)][std::size_t(a)] = int(v);
      }
    add_entry(K, std::move(args), cplx(nums[nums.size() - 2], nums.back()));
  }
  if (K.arity == 0) throw ConfigError("kernel file has no entries");
  return symmetrize(K);
}

}  // namespace plrg
