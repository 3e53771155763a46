#include "cvsim/fock.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fmt/format.h>
#include <numbers>
#include <numeric>
#include <string>
#include <map>
#include <unordered_map>
#include <unsupported/Eigen/MatrixFunctions>

#include "cvsim/conventions.hpp"
#include "cvsim/error.hpp"

namespace cvsim::fock {

namespace {

constexpr Complex kI(0.0, 1.0);

using Triplet = Eigen::Triplet<Complex>;

SparseOp from_triplets(int dim, const std::vector<Triplet>& triplets) {
  SparseOp op(dim, dim);
  op.setFromTriplets(triplets.begin(), triplets.end());
  op.makeCompressed();
  return op;
}

void check_mode(const FockState& state, int mode) {
  if (mode < 0 || mode >= state.n_modes()) {
    throw WiringError(fmt::format("mode {} out of range for a {}-mode Fock state", mode,
                                  state.n_modes()));
  }
}

void check_distinct(const FockState& state, int m1, int m2) {
  check_mode(state, m1);
  check_mode(state, m2);
  if (m1 == m2) throw WiringError(fmt::format("mode {} repeated", m1));
}

// U rho U^dagger using only sparse-times-dense products.
CMatrix conjugate(const SparseOp& u, const CMatrix& rho) {
  const CMatrix left = u * rho;
  const CMatrix right = u * left.adjoint();
  return right.adjoint();
}

constexpr Eigen::Index kTile = 32;

// In place rho <- (rho + rho^dagger) / 2, tile by tile to stay in cache.
void hermitize(CMatrix& rho) {
  const Eigen::Index n = rho.rows();
  for (Eigen::Index jb = 0; jb < n; jb += kTile) {
    const Eigen::Index je = std::min(n, jb + kTile);
    for (Eigen::Index ib = jb; ib < n; ib += kTile) {
      const Eigen::Index ie = std::min(n, ib + kTile);
      for (Eigen::Index j = jb; j < je; ++j) {
        for (Eigen::Index i = std::max(ib, j); i < ie; ++i) {
          const Complex v = 0.5 * (rho(i, j) + std::conj(rho(j, i)));
          rho(i, j) = v;
          rho(j, i) = std::conj(v);
        }
      }
    }
  }
}

// Index into `to` of each basis state of `from`, or -1.
std::vector<int> index_map(const FockBasis& from, const FockBasis& to) {
  std::vector<int> map(static_cast<std::size_t>(from.dim()));
  for (int i = 0; i < from.dim(); ++i) map[i] = to.index_of(from.occupation(i));
  return map;
}

struct UnionFind {
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
  std::vector<int> parent;
};

double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

// ---------------------------------------------------------------------------
// Basis

FockBasis::FockBasis(int n_modes, int cutoff, std::optional<int> max_total)
    : FockBasis(n_modes, cutoff, max_total, true) {
  if (n_modes < 1 || n_modes > 3) {
    throw InvalidArgument(fmt::format("Fock oracle supports 1 to 3 modes, got {}", n_modes));
  }
  if (cutoff < 2) throw InvalidArgument(fmt::format("cutoff must be >= 2, got {}", cutoff));
  if (max_total && *max_total < 0) throw InvalidArgument("photon-number cap must be >= 0");
  if (dim() > kMaxDimension) {
    throw InvalidArgument(fmt::format(
        "Fock space dimension {} exceeds the limit of {}", dim(), kMaxDimension));
  }
}

FockBasis::FockBasis(int n_modes, int cutoff, std::optional<int> max_total, bool)
    : n_modes_(n_modes), cutoff_(cutoff), max_total_(max_total) {
  if (n_modes_ >= 1 && n_modes_ <= 3 && cutoff_ >= 1) enumerate();
}

void FockBasis::enumerate() {
  std::size_t full = 1;
  for (int j = 0; j < n_modes_; ++j) full *= static_cast<std::size_t>(cutoff_);
  lookup_.assign(full, -1);
  std::vector<int> occ(static_cast<std::size_t>(n_modes_), 0);
  for (std::size_t flat = 0; flat < full; ++flat) {
    std::size_t rem = flat;
    int total = 0;
    for (int j = n_modes_ - 1; j >= 0; --j) {
      occ[j] = static_cast<int>(rem % cutoff_);
      rem /= cutoff_;
      total += occ[j];
    }
    if (max_total_ && total > *max_total_) continue;
    lookup_[flat] = static_cast<int>(states_.size() / n_modes_);
    states_.insert(states_.end(), occ.begin(), occ.end());
  }
}

int FockBasis::index_of(std::span<const int> occupation) const {
  std::size_t flat = 0;
  int total = 0;
  for (int j = 0; j < n_modes_; ++j) {
    const int n = occupation[j];
    if (n < 0 || n >= cutoff_) return -1;
    total += n;
    flat = flat * cutoff_ + static_cast<std::size_t>(n);
  }
  if (max_total_ && total > *max_total_) return -1;
  return lookup_[flat];
}

FockBasis FockBasis::without_mode(int mode) const {
  if (mode < 0 || mode >= n_modes_) throw WiringError("without_mode: mode out of range");
  if (n_modes_ == 1) throw WiringError("cannot remove the only mode");
  return FockBasis(n_modes_ - 1, cutoff_, max_total_, true);
}

FockBasis FockBasis::padded(int extra) const {
  std::optional<int> cap;
  if (max_total_) cap = *max_total_ + extra;
  return FockBasis(n_modes_, cutoff_ + extra, cap, true);
}

LadderOperators build_operators(const FockBasis& basis) {
  LadderOperators ops{basis, {}};
  std::vector<int> target(static_cast<std::size_t>(basis.n_modes()));
  for (int j = 0; j < basis.n_modes(); ++j) {
    std::vector<Triplet> triplets;
    for (int i = 0; i < basis.dim(); ++i) {
      const auto occ = basis.occupation(i);
      if (occ[j] == 0) continue;
      std::copy(occ.begin(), occ.end(), target.begin());
      --target[j];
      const int row = basis.index_of(target);
      triplets.emplace_back(row, i, std::sqrt(static_cast<double>(occ[j])));
    }
    ops.a.push_back(from_triplets(basis.dim(), triplets));
  }
  return ops;
}

LadderOperators build_operators(int n_modes, int cutoff) {
  return build_operators(FockBasis(n_modes, cutoff));
}

FockState vacuum_state(const FockBasis& basis) {
  const int zeros[3] = {0, 0, 0};
  return number_state(basis, std::span<const int>(zeros, basis.n_modes()));
}

FockState number_state(const FockBasis& basis, std::span<const int> occupation) {
  if (static_cast<int>(occupation.size()) != basis.n_modes()) {
    throw InvalidArgument("occupation length does not match the number of modes");
  }
  const int idx = basis.index_of(occupation);
  if (idx < 0) throw InvalidArgument("number state lies outside the truncated basis");
  FockState state{basis, CMatrix::Zero(basis.dim(), basis.dim()), 0.0};
  state.rho(idx, idx) = 1.0;
  return state;
}

// ---------------------------------------------------------------------------
// Gates

SparseOp generator(const Gate& gate, const LadderOperators& ops) {
  const int dim = ops.basis.dim();
  auto a = [&](int m) -> const SparseOp& {
    if (m < 0 || m >= ops.basis.n_modes()) throw WiringError("gate mode out of range");
    return ops.a[m];
  };
  auto ad = [&](int m) -> SparseOp { return SparseOp(a(m).adjoint()); };
  const double sigma = conventions::rotation_sign;

  return std::visit(
      [&](const auto& g) -> SparseOp {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, PhaseShift>) {
          SparseOp n = ad(g.mode) * a(g.mode);
          return SparseOp(Complex(0.0, -sigma * g.theta) * n);
        } else if constexpr (std::is_same_v<T, Displace>) {
          const Complex alpha(0.5 * g.dx, 0.5 * g.dp);
          return SparseOp(alpha * ad(g.mode) - std::conj(alpha) * a(g.mode));
        } else if constexpr (std::is_same_v<T, Squeeze>) {
          const Complex e = std::polar(1.0, -2.0 * g.phi);
          SparseOp a2 = a(g.mode) * a(g.mode);
          SparseOp ad2 = ad(g.mode) * ad(g.mode);
          return SparseOp(0.5 * g.r * (e * a2 - std::conj(e) * ad2));
        } else if constexpr (std::is_same_v<T, Beamsplitter>) {
          if (g.mode1 == g.mode2) throw WiringError("beamsplitter modes must differ");
          const Complex e = std::polar(1.0, g.phi);
          SparseOp ab = ad(g.mode2) * a(g.mode1);
          SparseOp adb = ad(g.mode1) * a(g.mode2);
          return SparseOp(g.theta * (e * ab - std::conj(e) * adb));
        } else if constexpr (std::is_same_v<T, TwoModeSqueeze>) {
          if (g.mode1 == g.mode2) throw WiringError("two-mode squeezer modes must differ");
          SparseOp ab = a(g.mode1) * a(g.mode2);
          SparseOp adbd = ad(g.mode1) * ad(g.mode2);
          return SparseOp(Complex(g.r) * (ab - adbd));
        } else {
          SparseOp n = ad(g.mode) * a(g.mode);
          SparseOp n2 = n * n;
          (void)dim;
          return SparseOp(Complex(0.0, -g.chi) * n2);
        }
      },
      gate);
}

namespace {

// One connected component of the generator, restricted to the basis.
struct Block {
  std::vector<int> idx;
  CMatrix u;
};

// A connected component of the padded generator: its dense restriction and
// the positions (and original indices) of members inside the unpadded basis.
struct Component {
  std::vector<int> idx;
  std::vector<Eigen::Index> keep;
  CMatrix gen;
};

void check_finite(const Gate& gate) {
  std::visit(
      [](const auto& g) {
        using T = std::decay_t<decltype(g)>;
        auto finite = [](std::initializer_list<double> xs) {
          for (double x : xs) {
            if (!std::isfinite(x)) throw InvalidArgument("gate parameters must be finite");
          }
        };
        if constexpr (std::is_same_v<T, PhaseShift>) finite({g.theta});
        else if constexpr (std::is_same_v<T, Displace>) finite({g.dx, g.dp});
        else if constexpr (std::is_same_v<T, Squeeze>) finite({g.r, g.phi});
        else if constexpr (std::is_same_v<T, Beamsplitter>) finite({g.theta, g.phi});
        else if constexpr (std::is_same_v<T, TwoModeSqueeze>) finite({g.r});
        else finite({g.chi});
      },
      gate);
}

std::vector<Component> components(const Gate& gate, const FockBasis& basis) {
  check_finite(gate);
  const FockBasis padded = basis.padded(kGeneratorPadding);
  const LadderOperators ops = build_operators(padded);
  const SparseOp g = generator(gate, ops);
  const std::vector<int> to_orig = index_map(padded, basis);

  UnionFind uf(padded.dim());
  for (int k = 0; k < g.outerSize(); ++k) {
    for (SparseOp::InnerIterator it(g, k); it; ++it) {
      if (it.value() != Complex(0.0)) uf.unite(static_cast<int>(it.row()), static_cast<int>(it.col()));
    }
  }
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(padded.dim()));
  for (int i = 0; i < padded.dim(); ++i) groups[uf.find(i)].push_back(i);

  std::vector<int> position(static_cast<std::size_t>(padded.dim()), -1);
  std::vector<Component> out;
  for (const auto& members : groups) {
    if (members.empty()) continue;
    Component c;
    for (std::size_t p = 0; p < members.size(); ++p) {
      if (to_orig[members[p]] >= 0) {
        c.keep.push_back(static_cast<Eigen::Index>(p));
        c.idx.push_back(to_orig[members[p]]);
      }
    }
    if (c.keep.empty()) continue;
    const auto size = static_cast<Eigen::Index>(members.size());
    for (Eigen::Index p = 0; p < size; ++p) position[members[p]] = static_cast<int>(p);
    c.gen = CMatrix::Zero(size, size);
    for (Eigen::Index p = 0; p < size; ++p) {
      for (SparseOp::InnerIterator it(g, members[p]); it; ++it) {
        if (it.value() != Complex(0.0)) c.gen(position[it.row()], p) = it.value();
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::string bytes_of(const CMatrix& m) {
  return std::string(reinterpret_cast<const char*>(m.data()),
                     static_cast<std::size_t>(m.size()) * sizeof(Complex));
}

std::vector<Block> gate_blocks(const Gate& gate, const FockBasis& basis) {
  // Identical blocks (e.g. the fibres of a one-mode gate) share one exponential.
  std::unordered_map<std::string, CMatrix> cache;
  std::vector<Block> blocks;
  for (Component& c : components(gate, basis)) {
    if (c.gen.size() == 1) {
      blocks.push_back({std::move(c.idx), CMatrix::Constant(1, 1, std::exp(c.gen(0, 0)))});
      continue;
    }
    std::string key = bytes_of(c.gen);
    auto found = cache.find(key);
    if (found == cache.end()) found = cache.emplace(std::move(key), CMatrix(c.gen.exp())).first;
    blocks.push_back({std::move(c.idx), found->second(c.keep, c.keep)});
  }
  return blocks;
}

SparseOp block_matrix(const std::vector<Block>& blocks, int dim) {
  std::vector<Triplet> triplets;
  for (const Block& b : blocks) {
    for (std::size_t q = 0; q < b.idx.size(); ++q) {
      for (std::size_t p = 0; p < b.idx.size(); ++p) {
        const Complex v = b.u(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
        if (v != Complex(0.0)) triplets.emplace_back(b.idx[p], b.idx[q], v);
      }
    }
  }
  return from_triplets(dim, triplets);
}

// rho <- W rho W^dagger in place for W block diagonal over disjoint index
// sets. Column block c of the result depends only on column block c of rho:
// W (rho_c W_c^dagger).
void block_conjugate(const std::vector<Block>& blocks, CMatrix& rho) {
  CMatrix x, y;
  for (const Block& c : blocks) {
    if (c.idx.size() == 1) {
      x = std::conj(c.u(0, 0)) * rho.col(c.idx[0]);
    } else {
      x.noalias() = rho(Eigen::all, c.idx) * c.u.adjoint();
    }
    for (const Block& b : blocks) {
      if (b.idx.size() == 1) {
        x.row(b.idx[0]) *= b.u(0, 0);
      } else {
        y.noalias() = b.u * x(b.idx, Eigen::all);
        x(b.idx, Eigen::all) = y;
      }
    }
    rho(Eigen::all, c.idx) = x;
  }
}

}  // namespace

SparseOp gate_unitary(const Gate& gate, const FockBasis& basis) {
  return block_matrix(gate_blocks(gate, basis), basis.dim());
}

FockState apply_gate_exact(FockState state, const Gate& gate) {
  std::visit(
      [&](const auto& g) {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, Beamsplitter> || std::is_same_v<T, TwoModeSqueeze>) {
          check_distinct(state, g.mode1, g.mode2);
        } else {
          check_mode(state, g.mode);
        }
      },
      gate);
  const double before = state.trace();
  block_conjugate(gate_blocks(gate, state.basis), state.rho);
  state.truncation_loss += std::max(0.0, before - state.trace());
  return state;
}

// ---------------------------------------------------------------------------
// Channels

std::vector<SparseOp> loss_kraus(const FockBasis& basis, int mode, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw InvalidArgument(fmt::format("loss transmissivity must lie in [0, 1], got {}", eta));
  }
  std::vector<SparseOp> kraus;
  std::vector<int> target(static_cast<std::size_t>(basis.n_modes()));
  for (int k = 0; k < basis.cutoff(); ++k) {
    std::vector<Triplet> triplets;
    for (int i = 0; i < basis.dim(); ++i) {
      const auto occ = basis.occupation(i);
      const int n = occ[mode];
      if (n < k) continue;
      const double coeff = std::sqrt(std::exp(log_binomial(n, k)) * std::pow(eta, n - k) *
                                     std::pow(1.0 - eta, k));
      if (coeff == 0.0) continue;
      std::copy(occ.begin(), occ.end(), target.begin());
      target[mode] -= k;
      triplets.emplace_back(basis.index_of(target), i, coeff);
    }
    if (!triplets.empty()) kraus.push_back(from_triplets(basis.dim(), triplets));
  }
  return kraus;
}

std::vector<SparseOp> amplifier_kraus(const FockBasis& basis, int mode, double gain) {
  if (!(gain >= 1.0) || !std::isfinite(gain)) {
    throw InvalidArgument(fmt::format("amplifier gain must be >= 1, got {}", gain));
  }
  std::vector<SparseOp> kraus;
  std::vector<int> target(static_cast<std::size_t>(basis.n_modes()));
  const double excess = 1.0 - 1.0 / gain;
  for (int k = 0; k < basis.cutoff(); ++k) {
    std::vector<Triplet> triplets;
    for (int i = 0; i < basis.dim(); ++i) {
      const auto occ = basis.occupation(i);
      const int n = occ[mode];
      std::copy(occ.begin(), occ.end(), target.begin());
      target[mode] += k;
      const int row = basis.index_of(target);
      if (row < 0) continue;
      const double coeff = std::sqrt(std::exp(log_binomial(n + k, k)) * std::pow(excess, k) *
                                     std::pow(gain, -(n + 1.0)));
      if (coeff == 0.0) continue;
      triplets.emplace_back(row, i, coeff);
    }
    if (!triplets.empty()) kraus.push_back(from_triplets(basis.dim(), triplets));
  }
  return kraus;
}

FockState apply_kraus(FockState state, std::span<const SparseOp> kraus) {
  const double before = state.trace();
  CMatrix out = CMatrix::Zero(state.rho.rows(), state.rho.cols());
  for (const SparseOp& k : kraus) {
    // Loss and amplifier Kraus operators have one entry per column: gather,
    // scale and scatter instead of multiplying.
    std::vector<int> src, dst;
    CVector coeff(k.nonZeros());
    bool monomial = true;
    for (int c = 0; c < k.outerSize() && monomial; ++c) {
      int count = 0;
      for (SparseOp::InnerIterator it(k, c); it; ++it) {
        if (++count > 1) {
          monomial = false;
          break;
        }
        coeff(static_cast<Eigen::Index>(src.size())) = it.value();
        src.push_back(c);
        dst.push_back(static_cast<int>(it.row()));
      }
    }
    std::vector<int> sorted = dst;
    std::sort(sorted.begin(), sorted.end());
    monomial = monomial && std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
    if (!monomial) {
      out += conjugate(k, state.rho);
      continue;
    }
    const CVector c = coeff.head(static_cast<Eigen::Index>(src.size()));
    out(dst, dst) += c.asDiagonal() * state.rho(src, src) * c.conjugate().asDiagonal();
  }
  state.rho = std::move(out);
  hermitize(state.rho);
  state.truncation_loss += std::max(0.0, before - state.trace());
  return state;
}

namespace {

// Random displacement t * u with t ~ N(0, nu). With the padded generator of
// Displace(u) written as i H = i V diag(lambda) V^dagger, the average of
// D(t) rho D(t)^dagger is V [exp(-nu (lambda_i - lambda_j)^2 / 2) o
// V^dagger rho V] V^dagger: a Gaussian dephasing in the eigenbasis of H.
FockState random_displacement(FockState state, int mode, const Eigen::Vector2d& u,
                              double nu) {
  struct Eigen_ {
    CMatrix v;
    Eigen::VectorXd lambda;
  };
  struct Piece {
    std::vector<int> idx;
    CMatrix w;  // rows: kept members, columns: eigenvectors
    int eig = 0;
    Eigen::Index offset = 0;
  };
  // Chains of equal length share one eigenproblem.
  std::unordered_map<std::string, int> cache;
  std::vector<Eigen_> eigs;
  std::vector<Piece> pieces;
  Eigen::Index total = 0;
  for (Component& c : components(Displace{mode, u(0), u(1)}, state.basis)) {
    auto [it, fresh] = cache.try_emplace(bytes_of(c.gen), static_cast<int>(eigs.size()));
    if (fresh) {
      const CMatrix h = Complex(0.0, -1.0) * c.gen;
      Eigen::SelfAdjointEigenSolver<CMatrix> solver(0.5 * (h + h.adjoint()));
      eigs.push_back({solver.eigenvectors(), solver.eigenvalues()});
    }
    const Eigen_& e = eigs[it->second];
    pieces.push_back({std::move(c.idx), e.v(c.keep, Eigen::all), it->second, total});
    total += e.lambda.size();
  }
  std::map<std::pair<int, int>, Matrix> damping;
  auto damp = [&](int b, int c) -> const Matrix& {
    auto [it, fresh] = damping.try_emplace({b, c});
    if (fresh) {
      const Eigen::VectorXd& lb = eigs[b].lambda;
      const Eigen::VectorXd& lc = eigs[c].lambda;
      it->second.resize(lb.size(), lc.size());
      for (Eigen::Index j = 0; j < lc.size(); ++j) {
        for (Eigen::Index i = 0; i < lb.size(); ++i) {
          const double d = lb(i) - lc(j);
          it->second(i, j) = std::exp(-0.5 * nu * d * d);
        }
      }
    }
    return it->second;
  };

  // Column block c of rho' = W (E o W^dagger rho W) W^dagger needs only the
  // columns idx_c of rho.
  const CMatrix& rho = state.rho;
  const Eigen::Index dim = rho.rows();
  CMatrix out(dim, dim);
  CMatrix x, y, z;
  for (const Piece& c : pieces) {
    const Eigen::Index pc = c.w.cols();
    x.noalias() = rho(Eigen::all, c.idx) * c.w;
    z.setZero(dim, pc);
    for (const Piece& b : pieces) {
      y.noalias() = b.w.adjoint() * x(b.idx, Eigen::all);
      y.array() *= damp(b.eig, c.eig).cast<Complex>().array();
      z(b.idx, Eigen::all) = b.w * y;
    }
    out(Eigen::all, c.idx) = z * c.w.adjoint();
  }
  (void)total;
  const double before = state.trace();
  state.rho = std::move(out);
  hermitize(state.rho);
  state.truncation_loss += std::max(0.0, before - state.trace());
  return state;
}

FockState isotropic_noise(FockState state, int mode, double nu) {
  // loss(eta) then amplifier(1/eta) adds 2 (1 - eta) / eta vacuum units.
  const double eta = 2.0 / (2.0 + nu / conventions::vacuum_variance);
  const auto loss = loss_kraus(state.basis, mode, eta);
  state = apply_kraus(std::move(state), loss);
  const auto amp = amplifier_kraus(state.basis, mode, 1.0 / eta);
  return apply_kraus(std::move(state), amp);
}

// Largest squeezing used to map anisotropic noise onto isotropic noise;
// beyond it the squeezers themselves would strain the truncation.
constexpr double kMaxNoiseSqueeze = 0.5;

FockState additive_noise(FockState state, int mode, const Eigen::Matrix2d& y) {
  if (!y.allFinite() || std::abs(y(0, 1) - y(1, 0)) > conventions::exact_tol) {
    throw InvalidArgument("noise covariance must be finite and symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(y);
  const double lo = solver.eigenvalues()(0);
  const double hi = solver.eigenvalues()(1);
  if (lo < -conventions::psd_tol) throw InvalidArgument("noise covariance is not PSD");
  if (hi <= 0.0) return state;

  if (lo > 0.0 && 0.25 * std::log(hi / lo) <= kMaxNoiseSqueeze) {
    // Y = nu S S^T with S = squeeze(r, phi) symmetric, so the channel is
    // S o (isotropic nu) o S^{-1}.
    const Eigen::Vector2d u = solver.eigenvectors().col(1);
    const double nu = std::sqrt(lo * hi);
    const double r = -0.25 * std::log(hi / lo);
    const double phi = std::atan2(conventions::rotation_sign * u(1), u(0));
    if (r != 0.0) state = apply_gate_exact(std::move(state), Squeeze{mode, -r, phi});
    state = isotropic_noise(std::move(state), mode, nu);
    if (r != 0.0) state = apply_gate_exact(std::move(state), Squeeze{mode, r, phi});
    return state;
  }
  // Classical displacement noise is additive, so the principal directions
  // are applied one after the other.
  for (int k = 1; k >= 0; --k) {
    const double nu = solver.eigenvalues()(k);
    if (nu <= 0.0) continue;
    state = random_displacement(std::move(state), mode, solver.eigenvectors().col(k), nu);
  }
  return state;
}

}  // namespace

FockState apply_channel_exact(FockState state, const Channel& channel) {
  return std::visit(
      [&](const auto& ch) -> FockState {
        using T = std::decay_t<decltype(ch)>;
        check_mode(state, ch.mode);
        if constexpr (std::is_same_v<T, Loss>) {
          const auto kraus = loss_kraus(state.basis, ch.mode, ch.eta);
          return apply_kraus(std::move(state), kraus);
        } else if constexpr (std::is_same_v<T, Amplifier>) {
          const auto kraus = amplifier_kraus(state.basis, ch.mode, ch.gain);
          return apply_kraus(std::move(state), kraus);
        } else if constexpr (std::is_same_v<T, PhaseSensitiveAmp>) {
          if (!(ch.g > 0.0) || !(ch.extra_noise >= 0.0)) {
            throw InvalidArgument("phase-sensitive amplifier needs g > 0 and extra noise >= 0");
          }
          // x -> g x, p -> p / g is squeeze(-ln g, 0).
          state = apply_gate_exact(std::move(state), Squeeze{ch.mode, -std::log(ch.g), 0.0});
          if (ch.extra_noise > 0.0) {
            state = additive_noise(std::move(state), ch.mode,
                                   ch.extra_noise * Eigen::Matrix2d::Identity());
          }
          return state;
        } else {
          return additive_noise(std::move(state), ch.mode, ch.noise_cov);
        }
      },
      channel);
}

FockState add_vacuum_mode(const FockState& state) {
  const FockBasis basis(state.n_modes() + 1, state.basis.cutoff(), state.basis.max_total());
  FockState out{basis, CMatrix::Zero(basis.dim(), basis.dim()), state.truncation_loss};
  std::vector<int> map(static_cast<std::size_t>(state.basis.dim()));
  std::vector<int> occ(static_cast<std::size_t>(basis.n_modes()), 0);
  for (int i = 0; i < state.basis.dim(); ++i) {
    const auto o = state.basis.occupation(i);
    std::copy(o.begin(), o.end(), occ.begin());
    occ.back() = 0;
    map[i] = basis.index_of(occ);
  }
  for (int i = 0; i < state.basis.dim(); ++i) {
    for (int j = 0; j < state.basis.dim(); ++j) out.rho(map[i], map[j]) = state.rho(i, j);
  }
  return out;
}

Projection project_mode(const FockState& state, int mode, const CVector& phi) {
  check_mode(state, mode);
  const FockBasis& basis = state.basis;
  if (phi.size() < basis.cutoff()) throw InvalidArgument("projection vector too short");
  if (basis.n_modes() == 1) {
    const CVector head = phi.head(basis.cutoff());
    return {std::nullopt, (head.adjoint() * state.rho * head)(0, 0).real()};
  }
  const FockBasis reduced = basis.without_mode(mode);
  std::vector<int> rest(static_cast<std::size_t>(basis.dim()));
  std::vector<int> level(static_cast<std::size_t>(basis.dim()));
  std::vector<int> occ(static_cast<std::size_t>(reduced.n_modes()));
  for (int i = 0; i < basis.dim(); ++i) {
    const auto o = basis.occupation(i);
    int k = 0;
    for (int j = 0; j < basis.n_modes(); ++j) {
      if (j != mode) occ[k++] = o[j];
    }
    rest[i] = reduced.index_of(occ);
    level[i] = o[mode];
  }
  FockState out{reduced, CMatrix::Zero(reduced.dim(), reduced.dim()), state.truncation_loss};
  for (int t = 0; t < basis.dim(); ++t) {
    const Complex right = phi(level[t]);
    if (right == Complex(0.0)) continue;
    for (int s = 0; s < basis.dim(); ++s) {
      out.rho(rest[s], rest[t]) += std::conj(phi(level[s])) * right * state.rho(s, t);
    }
  }
  const double weight = out.trace();
  return {std::move(out), weight};
}

FockState partial_trace(const FockState& state, int mode) {
  check_mode(state, mode);
  const FockBasis reduced = state.basis.without_mode(mode);
  FockState out{reduced, CMatrix::Zero(reduced.dim(), reduced.dim()), state.truncation_loss};
  for (int n = 0; n < state.basis.cutoff(); ++n) {
    CVector e = CVector::Zero(state.basis.cutoff());
    e(n) = 1.0;
    Projection p = project_mode(state, mode, e);
    out.rho += p.state->rho;
  }
  return out;
}

FockState amplifier_by_dilation(const FockState& state, int mode, double gain) {
  if (!(gain >= 1.0)) throw InvalidArgument("amplifier gain must be >= 1");
  check_mode(state, mode);
  FockState extended = add_vacuum_mode(state);
  const int ancilla = extended.n_modes() - 1;
  extended = apply_gate_exact(std::move(extended),
                              TwoModeSqueeze{mode, ancilla, std::acosh(std::sqrt(gain))});
  return partial_trace(extended, ancilla);
}

// ---------------------------------------------------------------------------
// Measurements

std::vector<double> hermite_functions(int count, double x) {
  if (count > 150) {
    throw InvalidArgument("Hermite functions are only evaluated up to n = 150");
  }
  // psi_n(x) = 2^{-1/4} phi_n(x / sqrt 2), phi_n the standard Hermite functions.
  const double q = x / std::numbers::sqrt2;
  std::vector<double> out(static_cast<std::size_t>(count), 0.0);
  if (count == 0) return out;
  const double scale = std::pow(2.0, -0.25);
  double prev = 0.0;
  double cur = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * q * q);
  out[0] = scale * cur;
  for (int n = 0; n + 1 < count; ++n) {
    const double next = std::sqrt(2.0 / (n + 1)) * q * cur - std::sqrt(n / (n + 1.0)) * prev;
    prev = cur;
    cur = next;
    out[n + 1] = scale * cur;
  }
  return out;
}

CVector quadrature_eigenstate(int cutoff, double theta, double x) {
  const auto psi = hermite_functions(cutoff, x);
  CVector v(cutoff);
  for (int n = 0; n < cutoff; ++n) {
    v(n) = std::polar(psi[n], conventions::rotation_sign * theta * n);
  }
  return v;
}

CVector coherent_amplitudes(int cutoff, double mx, double mp) {
  const Complex alpha(0.5 * mx / std::sqrt(conventions::vacuum_variance),
                      0.5 * mp / std::sqrt(conventions::vacuum_variance));
  CVector v(cutoff);
  Complex term = std::exp(-0.5 * std::norm(alpha));
  for (int n = 0; n < cutoff; ++n) {
    v(n) = term;
    term *= alpha / std::sqrt(n + 1.0);
  }
  return v;
}

CMatrix reduced_density(const FockState& state, int mode) {
  check_mode(state, mode);
  FockState current = state;
  for (int j = state.n_modes() - 1; j >= 0; --j) {
    if (j != mode) current = partial_trace(current, j);
  }
  // The reduced state of a capped basis still has per-mode cutoff levels.
  CMatrix out = CMatrix::Zero(state.basis.cutoff(), state.basis.cutoff());
  for (int i = 0; i < current.basis.dim(); ++i) {
    for (int j = 0; j < current.basis.dim(); ++j) {
      out(current.basis.occupation(i)[0], current.basis.occupation(j)[0]) = current.rho(i, j);
    }
  }
  return out;
}

namespace {

void check_grid(std::span<const double> grid) {
  if (grid.size() < 3) throw InvalidArgument("homodyne grid needs at least 3 points");
  for (double x : grid) {
    if (!(x >= -8.0 && x <= 8.0)) throw InvalidArgument("homodyne grid must lie in [-8, 8]");
  }
}

FockState with_efficiency(const FockState& state, int mode, double efficiency) {
  if (!(efficiency > 0.0 && efficiency <= 1.0)) {
    throw InvalidArgument("detector efficiency must lie in (0, 1]");
  }
  if (efficiency == 1.0) return state;
  return apply_channel_exact(state, Loss{mode, efficiency});
}

double expectation(const CMatrix& rho, const CVector& phi) {
  return (phi.adjoint() * rho * phi)(0, 0).real();
}

ConditionalResult normalised(Projection p, double density_scale) {
  if (!(p.weight > 0.0)) {
    throw NumericalError("conditioning on an outcome of zero probability");
  }
  ConditionalResult out;
  out.density_or_prob = p.weight * density_scale;
  if (p.state) {
    p.state->rho /= p.weight;
    out.state = std::move(p.state);
  }
  return out;
}

}  // namespace

std::vector<double> homodyne_density_grid(const FockState& state, int mode, double angle,
                                          double efficiency, std::span<const double> grid) {
  check_grid(grid);
  const CMatrix rho = reduced_density(with_efficiency(state, mode, efficiency), mode);
  std::vector<double> out;
  out.reserve(grid.size());
  for (double x : grid) {
    out.push_back(expectation(rho, quadrature_eigenstate(state.basis.cutoff(), angle, x)));
  }
  return out;
}

ConditionalResult homodyne_condition(const FockState& state, int mode, double angle,
                                     double efficiency, double x) {
  const FockState lossy = with_efficiency(state, mode, efficiency);
  return normalised(project_mode(lossy, mode, quadrature_eigenstate(state.basis.cutoff(), angle, x)),
                    1.0);
}

ConditionalResult heterodyne_condition(const FockState& state, int mode, double mx, double mp) {
  const double scale = 1.0 / (4.0 * std::numbers::pi * conventions::vacuum_variance);
  return normalised(project_mode(state, mode, coherent_amplitudes(state.basis.cutoff(), mx, mp)),
                    scale);
}

double vacuum_probability(const FockState& state, std::span<const int> modes) {
  std::vector<int> sorted(modes.begin(), modes.end());
  std::sort(sorted.rbegin(), sorted.rend());
  CVector e0 = CVector::Zero(state.basis.cutoff());
  e0(0) = 1.0;
  std::optional<FockState> current = state;
  double weight = 1.0;
  for (int m : sorted) {
    Projection p = project_mode(*current, m, e0);
    weight = p.weight;
    current = std::move(p.state);
  }
  return weight;
}

ConditionalResult threshold_condition(const FockState& state, std::span<const int> modes,
                                      ThresholdBranch branch) {
  if (modes.empty()) throw WiringError("threshold detection needs at least one mode");
  std::vector<int> sorted(modes.begin(), modes.end());
  std::sort(sorted.rbegin(), sorted.rend());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    check_mode(state, sorted[i]);
    if (i > 0 && sorted[i] == sorted[i - 1]) throw WiringError("threshold modes repeated");
  }
  CVector e0 = CVector::Zero(state.basis.cutoff());
  e0(0) = 1.0;

  std::optional<FockState> vac = state;
  std::optional<FockState> traced = state;
  double vac_weight = 1.0;
  for (int m : sorted) {
    Projection p = project_mode(*vac, m, e0);
    vac_weight = p.weight;
    vac = std::move(p.state);
    if (traced->n_modes() > 1) {
      traced = partial_trace(*traced, m);
    } else {
      traced.reset();
    }
  }
  if (branch == ThresholdBranch::no_absorption) {
    return normalised({std::move(vac), vac_weight}, 1.0);
  }
  const double total = state.trace();
  Projection absorbed{std::nullopt, total - vac_weight};
  if (traced) {
    traced->rho -= vac->rho;
    absorbed.state = std::move(traced);
  }
  return normalised(std::move(absorbed), 1.0);
}

std::vector<double> photon_number_distribution(const FockState& state, int mode) {
  const CMatrix rho = reduced_density(state, mode);
  std::vector<double> out(static_cast<std::size_t>(rho.rows()));
  for (Eigen::Index n = 0; n < rho.rows(); ++n) out[n] = rho(n, n).real();
  return out;
}

ConditionalResult photon_count_condition(const FockState& state, int mode, int n) {
  if (n < 0 || n >= state.basis.cutoff()) throw InvalidArgument("photon count outside cutoff");
  CVector e = CVector::Zero(state.basis.cutoff());
  e(n) = 1.0;
  return normalised(project_mode(state, mode, e), 1.0);
}

double sample_homodyne(const FockState& state, int mode, double angle, double efficiency,
                       RngStream& rng) {
  constexpr int kPoints = 4001;
  std::vector<double> grid(kPoints);
  for (int i = 0; i < kPoints; ++i) grid[i] = -8.0 + 16.0 * i / (kPoints - 1);
  const auto density = homodyne_density_grid(state, mode, angle, efficiency, grid);
  std::vector<double> cdf(kPoints, 0.0);
  for (int i = 1; i < kPoints; ++i) {
    cdf[i] = cdf[i - 1] + 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
  }
  const double u = rng.uniform() * cdf.back();
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  const auto i = std::clamp<std::ptrdiff_t>(it - cdf.begin(), 1, kPoints - 1);
  const double span = cdf[i] - cdf[i - 1];
  const double t = span > 0.0 ? (u - cdf[i - 1]) / span : 0.5;
  return grid[i - 1] + t * (grid[i] - grid[i - 1]);
}

Eigen::Vector2d sample_heterodyne(const FockState& state, int mode, RngStream& rng) {
  constexpr int kPoints = 161;
  const double step = 16.0 / (kPoints - 1);
  const CMatrix rho = reduced_density(state, mode);
  std::vector<double> cdf;
  cdf.reserve(kPoints * kPoints);
  double total = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    for (int j = 0; j < kPoints; ++j) {
      const double mx = -8.0 + step * i;
      const double mp = -8.0 + step * j;
      total += std::max(0.0, expectation(rho, coherent_amplitudes(state.basis.cutoff(), mx, mp)));
      cdf.push_back(total);
    }
  }
  const double u = rng.uniform() * total;
  const auto k = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
  const double mx = -8.0 + step * (static_cast<double>(k / kPoints) + rng.uniform() - 0.5);
  const double mp = -8.0 + step * (static_cast<double>(k % kPoints) + rng.uniform() - 0.5);
  return {mx, mp};
}

int sample_photon_count(const FockState& state, int mode, RngStream& rng) {
  const auto dist = photon_number_distribution(state, mode);
  const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
  double u = rng.uniform() * total;
  for (std::size_t n = 0; n < dist.size(); ++n) {
    u -= dist[n];
    if (u <= 0.0) return static_cast<int>(n);
  }
  return static_cast<int>(dist.size()) - 1;
}

// ---------------------------------------------------------------------------
// Moments and diagnostics

Moments moments(const FockState& state) {
  // Two extra levels make x^2 and p^2 exact on every retained state.
  const FockBasis padded = state.basis.padded(2);
  const LadderOperators ops = build_operators(padded);
  const std::vector<int> to_orig = index_map(padded, state.basis);
  const int n = state.n_modes();

  std::vector<SparseOp> quad;
  for (int j = 0; j < n; ++j) {
    SparseOp ad = ops.a[j].adjoint();
    quad.emplace_back(ops.a[j] + ad);
    quad.emplace_back(Complex(0.0, -1.0) * (ops.a[j] - ad));
  }
  auto trace_with = [&](const SparseOp& op) {
    Complex sum = 0.0;
    for (int k = 0; k < op.outerSize(); ++k) {
      const int col = to_orig[k];
      if (col < 0) continue;
      for (SparseOp::InnerIterator it(op, k); it; ++it) {
        const int row = to_orig[it.row()];
        if (row >= 0) sum += it.value() * state.rho(col, row);
      }
    }
    return sum;
  };

  Moments m{Vector::Zero(2 * n), Matrix::Zero(2 * n, 2 * n)};
  for (int i = 0; i < 2 * n; ++i) m.mean(i) = trace_with(quad[i]).real();
  for (int i = 0; i < 2 * n; ++i) {
    for (int j = i; j < 2 * n; ++j) {
      SparseOp sym = quad[i] * quad[j];
      SparseOp rev = quad[j] * quad[i];
      const double second = 0.5 * (trace_with(sym) + trace_with(rev)).real();
      m.cov(i, j) = m.cov(j, i) = second - m.mean(i) * m.mean(j);
    }
  }
  return m;
}

TruncationHealth truncation_health(const FockState& state) {
  TruncationHealth h;
  const FockBasis& b = state.basis;
  std::vector<double> top(static_cast<std::size_t>(b.n_modes()), 0.0);
  for (int i = 0; i < b.dim(); ++i) {
    const auto occ = b.occupation(i);
    const double pop = state.rho(i, i).real();
    int total = 0;
    for (int j = 0; j < b.n_modes(); ++j) {
      if (occ[j] == b.cutoff() - 1) top[j] += pop;
      total += occ[j];
    }
    if (b.max_total() && total == *b.max_total()) h.top_shell_population += pop;
  }
  h.top_level_population = *std::max_element(top.begin(), top.end());
  h.truncation_loss = state.truncation_loss;
  return h;
}

ValidityReport check_state(const FockState& state) {
  ValidityReport r;
  r.trace = state.trace();
  r.hermiticity_residual = (state.rho - state.rho.adjoint()).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(0.5 * (state.rho + state.rho.adjoint()),
                                                Eigen::EigenvaluesOnly);
  r.min_eigenvalue = solver.eigenvalues().minCoeff();
  return r;
}

const char* to_string(ComparisonStatus status) {
  switch (status) {
    case ComparisonStatus::pass: return "pass";
    case ComparisonStatus::fail: return "fail";
    case ComparisonStatus::inconclusive: return "inconclusive";
  }
  return "unknown";
}

ComparisonReport compare(const GaussianState& gauss, const FockState& fock, double tol,
                         double health_threshold) {
  if (gauss.n_modes() != fock.n_modes()) {
    throw WiringError(fmt::format("cannot compare a {}-mode state with a {}-mode state",
                                  gauss.n_modes(), fock.n_modes()));
  }
  const Moments m = moments(fock);
  ComparisonReport r;
  r.max_mean_deviation = (m.mean - gauss.mean()).cwiseAbs().maxCoeff();
  r.max_cov_deviation = (m.cov - gauss.cov()).cwiseAbs().maxCoeff();
  r.health = truncation_health(fock);
  r.healthy = r.health.metric() <= health_threshold;
  if (!r.healthy) {
    r.status = ComparisonStatus::inconclusive;
  } else if (r.max_mean_deviation <= tol && r.max_cov_deviation <= tol) {
    r.status = ComparisonStatus::pass;
  } else {
    r.status = ComparisonStatus::fail;
  }
  return r;
}

}  // namespace cvsim::fock
