#pragma once

// FCIDUMP-style electron integrals: core energy, one-electron matrix h and the
// two-electron tensor (pq|rs) in chemists' notation, stored once per 8-fold
// symmetry class and served for any index order.

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <functional>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "flagopt/errors.hpp"
#include "flagopt/manifold.hpp"

namespace flagopt::rohf {

using WarningHandler = std::function<void(const std::string&)>;

class IntegralSet {
 public:
  IntegralSet() = default;
  explicit IntegralSet(int n_orb, double e_core = 0.0)
      : n_(n_orb), e_core_(e_core), h_(Matrix::Zero(n_orb, n_orb)) {
    if (n_orb < 1) throw ShapeError("integral set needs at least one orbital");
    const std::size_t np = npairs();
    eri_.assign(np * (np + 1) / 2, 0.0);
  }

  /// Header fields carried along for consumers (CLI shape inference).
  struct Metadata {
    int nelec = -1;
    int ms2 = 0;
  } metadata;

  int n_orb() const { return n_; }
  double e_core() const { return e_core_; }
  void set_e_core(double e) { e_core_ = e; }
  const Matrix& h() const { return h_; }

  void set_h(int i, int j, double v) {
    check_index(i); check_index(j);
    h_(i, j) = v;
    h_(j, i) = v;
  }

  /// (ij|kl), any of the 8 equivalent orderings. Zero-based indices.
  double eri(int i, int j, int k, int l) const { return eri_[canonical(i, j, k, l)]; }
  void set_eri(int i, int j, int k, int l, double v) { eri_[canonical(i, j, k, l)] = v; }

  /// Visit each stored canonical entry once: f(i, j, k, l, value) with
  /// i>=j, k>=l, pair(ij)>=pair(kl). Skips exact zeros.
  template <typename F>
  void for_each_canonical(F&& f) const {
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j <= i; ++j) {
        const std::size_t ij = pair_index(i, j);
        for (int k = 0; k <= i; ++k)
          for (int l = 0; l <= k; ++l) {
            const std::size_t kl = pair_index(k, l);
            if (kl > ij) continue;
            const double v = eri_[ij * (ij + 1) / 2 + kl];
            if (v != 0.0) f(i, j, k, l, v);
          }
      }
  }

  std::size_t canonical(int i, int j, int k, int l) const {
    check_index(i); check_index(j); check_index(k); check_index(l);
    std::size_t ij = pair_index(i, j), kl = pair_index(k, l);
    if (ij < kl) std::swap(ij, kl);
    return ij * (ij + 1) / 2 + kl;
  }

 private:
  static std::size_t pair_index(int i, int j) {
    if (i < j) std::swap(i, j);
    return static_cast<std::size_t>(i) * (i + 1) / 2 + j;
  }
  std::size_t npairs() const { return static_cast<std::size_t>(n_) * (n_ + 1) / 2; }
  void check_index(int i) const {
    if (i < 0 || i >= n_) throw ShapeError("orbital index out of range");
  }

  int n_ = 0;
  double e_core_ = 0.0;
  Matrix h_;
  std::vector<double> eri_;
};

namespace detail {

inline double parse_value(const std::string& tok, long line) {
  std::string t = tok;
  for (char& c : t)
    if (c == 'D' || c == 'd') c = 'E';
  try {
    std::size_t used = 0;
    double v = std::stod(t, &used);
    if (used != t.size()) throw ParseError("malformed numeric field '" + tok + "'", line);
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError("malformed numeric field '" + tok + "'", line);
  }
}

inline long parse_int(const std::string& tok, long line) {
  try {
    std::size_t used = 0;
    long v = std::stol(tok, &used);
    if (used != tok.size()) throw ParseError("malformed integer field '" + tok + "'", line);
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError("malformed integer field '" + tok + "'", line);
  }
}

struct Token {
  std::string text;
  long line;
};

}  // namespace detail

/// Parse an FCIDUMP stream: a namelist header with at least NORB and NELEC,
/// closed by "&END" (or "/"), followed by `value i j k l` records with 1-based
/// indices. i j k l all nonzero: (ij|kl); k=l=0: h_ij; all zero: core energy.
/// Orbital-energy records (i,0,0,0) are skipped with a warning, duplicates
/// overwrite with a warning. Fortran D exponents are accepted.
inline IntegralSet parse_fcidump(std::istream& in, const WarningHandler& warn = {}) {
  const auto emit = [&](const std::string& msg) {
    if (warn) warn(msg);
  };

  // Header: accumulate text until the &END / "/" terminator.
  std::string header;
  long line_no = 0;
  long header_end_line = 0;
  {
    std::string line;
    bool closed = false;
    while (std::getline(in, line)) {
      ++line_no;
      std::string upper = line;
      for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      const auto endpos = upper.find("&END");
      const auto slashpos = upper.find('/');
      auto cut = std::string::npos;
      if (endpos != std::string::npos) cut = endpos;
      if (slashpos != std::string::npos && slashpos < cut) cut = slashpos;
      if (cut != std::string::npos) {
        header += ' ' + line.substr(0, cut);
        closed = true;
        header_end_line = line_no;
        break;
      }
      header += ' ' + line;
    }
    if (!closed) throw ParseError("header namelist is never terminated by &END or /", line_no);
  }

  // Tokenize KEY=VALUE[,VALUE...] pairs; bare values extend the previous key.
  long norb = -1, nelec = -1, ms2 = 0;
  bool has_ms2 = false;
  {
    for (char& c : header)
      if (c == ',' || c == '\t') c = ' ';
    std::vector<std::string> toks;
    std::string cur;
    for (char c : header) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!cur.empty()) toks.push_back(cur), cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) toks.push_back(cur);

    std::string key;
    for (const std::string& t : toks) {
      if (t == "&FCI" || t == "&fci") continue;
      std::string name = t, value;
      const auto eq = t.find('=');
      if (eq != std::string::npos) {
        name = t.substr(0, eq);
        value = t.substr(eq + 1);
        for (char& c : name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        key = name;
      } else {
        value = t;  // continuation of the previous key's list
        if (key.empty()) throw ParseError("stray header token '" + t + "'", header_end_line);
      }
      if (value.empty()) continue;
      if (key == "NORB") norb = detail::parse_int(value, header_end_line);
      else if (key == "NELEC") nelec = detail::parse_int(value, header_end_line);
      else if (key == "MS2") { ms2 = detail::parse_int(value, header_end_line); has_ms2 = true; }
      // ORBSYM / ISYM and any other namelist keys are accepted and ignored.
    }
  }
  if (norb < 1) throw ParseError("header does not define a positive NORB", header_end_line);
  if (nelec < 0) throw ParseError("header does not define NELEC", header_end_line);
  (void)has_ms2;

  IntegralSet ints(static_cast<int>(norb));
  ints.metadata.nelec = static_cast<int>(nelec);
  ints.metadata.ms2 = static_cast<int>(ms2);

  // Record section: flat token stream with line tracking.
  std::vector<detail::Token> toks;
  {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      std::string cur;
      for (char c : line) {
        if (std::isspace(static_cast<unsigned char>(c))) {
          if (!cur.empty()) toks.push_back({cur, line_no}), cur.clear();
        } else {
          cur += c;
        }
      }
      if (!cur.empty()) toks.push_back({cur, line_no});
    }
  }
  if (toks.size() % 5 != 0)
    throw ParseError("trailing record is incomplete (records are `value i j k l`)",
                     toks.empty() ? header_end_line : toks.back().line);

  std::vector<bool> seen_eri, seen_h;
  seen_h.assign(static_cast<std::size_t>(norb) * norb, false);
  bool seen_core = false;
  {
    const std::size_t np = static_cast<std::size_t>(norb) * (norb + 1) / 2;
    seen_eri.assign(np * (np + 1) / 2, false);
  }

  for (std::size_t pos = 0; pos + 5 <= toks.size(); pos += 5) {
    const long line = toks[pos].line;
    const double value = detail::parse_value(toks[pos].text, line);
    long idx[4];
    for (int t = 0; t < 4; ++t) {
      idx[t] = detail::parse_int(toks[pos + 1 + t].text, toks[pos + 1 + t].line);
      if (idx[t] < 0 || idx[t] > norb)
        throw ParseError("orbital index " + std::to_string(idx[t]) + " outside [0, NORB]",
                         toks[pos + 1 + t].line);
    }
    const long i = idx[0], j = idx[1], k = idx[2], l = idx[3];
    if (i == 0 && j == 0 && k == 0 && l == 0) {
      if (seen_core) emit("line " + std::to_string(line) + ": duplicate core-energy record overwrites the previous one");
      ints.set_e_core(value);
      seen_core = true;
    } else if (i > 0 && j > 0 && k == 0 && l == 0) {
      const std::size_t flat = static_cast<std::size_t>(std::max(i, j) - 1) * norb + (std::min(i, j) - 1);
      if (seen_h[flat]) emit("line " + std::to_string(line) + ": duplicate h(" + std::to_string(i) + "," + std::to_string(j) + ") record overwrites the previous one");
      ints.set_h(static_cast<int>(i - 1), static_cast<int>(j - 1), value);
      seen_h[flat] = true;
    } else if (i > 0 && j > 0 && k > 0 && l > 0) {
      const std::size_t can = ints.canonical(static_cast<int>(i - 1), static_cast<int>(j - 1),
                                             static_cast<int>(k - 1), static_cast<int>(l - 1));
      if (seen_eri[can]) emit("line " + std::to_string(line) + ": duplicate integral record overwrites the previous one");
      ints.set_eri(static_cast<int>(i - 1), static_cast<int>(j - 1), static_cast<int>(k - 1),
                   static_cast<int>(l - 1), value);
      seen_eri[can] = true;
    } else if (i > 0 && j == 0 && k == 0 && l == 0) {
      emit("line " + std::to_string(line) + ": orbital-energy record ignored");
    } else {
      throw ParseError("unrecognized index pattern (" + std::to_string(i) + "," + std::to_string(j) +
                       "," + std::to_string(k) + "," + std::to_string(l) + ")", line);
    }
  }
  return ints;
}

namespace detail {

template <typename F>
inline void for_each_permutation(int i, int j, int k, int l, F&& f) {
  int tup[8][4] = {{i, j, k, l}, {j, i, k, l}, {i, j, l, k}, {j, i, l, k},
                   {k, l, i, j}, {l, k, i, j}, {k, l, j, i}, {l, k, j, i}};
  int count = 0;
  int seen[8][4];
  for (auto& t : tup) {
    bool dup = false;
    for (int s = 0; s < count && !dup; ++s)
      dup = seen[s][0] == t[0] && seen[s][1] == t[1] && seen[s][2] == t[2] && seen[s][3] == t[3];
    if (dup) continue;
    for (int c = 0; c < 4; ++c) seen[count][c] = t[c];
    ++count;
    f(t[0], t[1], t[2], t[3]);
  }
}

inline void check_density(const IntegralSet& ints, const Matrix& P) {
  if (P.rows() != ints.n_orb() || P.cols() != ints.n_orb())
    throw ShapeError("density matrix size does not match the integral set");
}

}  // namespace detail

/// Coulomb matrix J(P)_pq = sum_rs (pq|rs) P_rs, scattering every stored
/// canonical entry into its distinct index permutations once.
inline Matrix coulomb(const IntegralSet& ints, const Matrix& P) {
  detail::check_density(ints, P);
  Matrix J = Matrix::Zero(P.rows(), P.cols());
  ints.for_each_canonical([&](int i, int j, int k, int l, double v) {
    detail::for_each_permutation(i, j, k, l, [&](int a, int b, int c, int d) {
      J(a, b) += v * P(c, d);
    });
  });
  return J;
}

inline Matrix exchange(const IntegralSet& ints, const Matrix& P) {
  detail::check_density(ints, P);
  Matrix K = Matrix::Zero(P.rows(), P.cols());
  ints.for_each_canonical([&](int i, int j, int k, int l, double v) {
    detail::for_each_permutation(i, j, k, l, [&](int a, int b, int c, int d) {
      // (ab|cd) contributes to K_ac via K(P)_pq = sum_rs (pr|qs) P_rs.
      K(a, c) += v * P(b, d);
    });
  });
  return K;
}

}  // namespace flagopt::rohf
