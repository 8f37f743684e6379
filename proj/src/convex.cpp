#include "svilab/convex.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "svilab/error.hpp"

namespace svilab {

const char* to_string(PotentialKind k) noexcept {
  switch (k) {
    case PotentialKind::Psi1: return "PSI1";
    case PotentialKind::Psi2: return "PSI2";
    case PotentialKind::Quadratic: return "QUADRATIC";
    case PotentialKind::Custom: return "CUSTOM";
  }
  return "CUSTOM";
}

const char* to_string(GrowthClass g) noexcept {
  return g == GrowthClass::Sublinear ? "SUBLINEAR" : "SUPERLINEAR";
}

double Polynomial::operator()(double x) const noexcept {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double Polynomial::derivative(double x) const noexcept {
  double acc = 0.0;
  for (std::size_t k = coeffs.size(); k-- > 1;) acc = acc * x + static_cast<double>(k) * coeffs[k];
  return acc;
}

double Polynomial::second_derivative(double x) const noexcept {
  double acc = 0.0;
  for (std::size_t k = coeffs.size(); k-- > 2;)
    acc = acc * x + static_cast<double>(k * (k - 1)) * coeffs[k];
  return acc;
}

int Polynomial::degree() const noexcept {
  for (std::size_t k = coeffs.size(); k-- > 0;)
    if (coeffs[k] != 0.0) return static_cast<int>(k);
  return 0;
}

double SubdiffInterval::min_abs() const noexcept {
  if (lower <= 0.0 && upper >= 0.0) return 0.0;
  return std::min(std::fabs(lower), std::fabs(upper));
}

// ---------------------------------------------------------------------------
// Potential

Potential Potential::psi1() {
  Potential p;
  p.kind_ = PotentialKind::Psi1;
  p.breaks_ = {1.0};
  p.pieces_ = {Polynomial{{0.0}}, Polynomial{{-1.0, 1.0}}};
  p.witness_ = 2.0;
  p.growth_constant_ = 1.0;
  p.finalize();
  return p;
}

Potential Potential::psi2() {
  Potential p;
  p.kind_ = PotentialKind::Psi2;
  p.breaks_ = {1.0};
  p.pieces_ = {Polynomial{{0.0}}, Polynomial{{-0.5, 0.0, 0.5}}};
  p.growth_constant_ = 1.0;
  p.finalize();
  return p;
}

Potential Potential::quadratic() {
  Potential p;
  p.kind_ = PotentialKind::Quadratic;
  p.pieces_ = {Polynomial{{0.0, 0.0, 0.5}}};
  p.growth_constant_ = 1.0;
  p.finalize();
  return p;
}

Potential Potential::custom(std::vector<double> breakpoints, std::vector<Polynomial> pieces,
                            double growth_constant, std::optional<double> witness_y) {
  if (pieces.size() != breakpoints.size() + 1)
    throw ParamError("potential: need exactly one more piece than breakpoints");
  for (std::size_t k = 0; k < breakpoints.size(); ++k) {
    if (!std::isfinite(breakpoints[k]) || breakpoints[k] <= 0.0)
      throw ParamError("potential: breakpoints must be finite and positive");
    if (k > 0 && breakpoints[k] <= breakpoints[k - 1])
      throw ParamError("potential: breakpoints must increase strictly");
  }
  for (auto& piece : pieces) {
    if (piece.coeffs.empty()) piece.coeffs = {0.0};
    for (double c : piece.coeffs)
      if (!std::isfinite(c)) throw ParamError("potential: non-finite coefficient");
  }
  if (!(growth_constant > 0.0)) throw ParamError("potential: growth constant must be positive");
  if (std::fabs(pieces.front()(0.0)) > 1e-14) throw ParamError("potential: psi(0) must be 0");
  if (pieces.front().derivative(0.0) < -1e-14)
    throw ParamError("potential: right derivative at 0 is negative, symmetric extension not convex");

  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const double lo = k == 0 ? 0.0 : breakpoints[k - 1];
    const double hi = k < breakpoints.size() ? breakpoints[k] : lo + 1.0;
    for (int s = 0; s <= 64; ++s) {
      const double y = lo + (hi - lo) * s / 64.0;
      if (pieces[k].second_derivative(y) < -1e-12)
        throw ParamError("potential: piece " + std::to_string(k) + " is not convex");
    }
    if (k + 1 < pieces.size()) {
      const double b = breakpoints[k];
      const double left = pieces[k](b);
      const double right = pieces[k + 1](b);
      if (std::fabs(left - right) > 1e-12 * (1.0 + std::fabs(left)))
        throw ParamError("potential: discontinuous at breakpoint " + std::to_string(b));
      if (pieces[k + 1].derivative(b) < pieces[k].derivative(b) - 1e-12)
        throw ParamError("potential: slope decreases at breakpoint " + std::to_string(b));
    }
  }
  const Polynomial& last = pieces.back();
  if (last.degree() > 2)
    throw ParamError("potential: growth faster than quadratic violates the growth bound");
  if (last.degree() == 2 && last.coeffs[2] < 0.0) throw ParamError("potential: not convex");

  Potential p;
  p.kind_ = PotentialKind::Custom;
  p.breaks_ = std::move(breakpoints);
  p.pieces_ = std::move(pieces);
  p.growth_constant_ = growth_constant;
  p.witness_ = witness_y;
  p.finalize();
  return p;
}

void Potential::finalize() {
  const Polynomial& last = pieces_.back();
  if (last.degree() == 2 && last.coeffs[2] > 0.0) {
    growth_ = GrowthClass::Superlinear;
    recession_slope_ = kInf;
  } else {
    growth_ = GrowthClass::Sublinear;
    recession_slope_ = last.degree() >= 1 ? last.coeffs[1] : 0.0;
  }
  if (growth_ == GrowthClass::Sublinear) {
    if (witness_) {
      if (!(*witness_ > 0.0) || !(value(*witness_) > 0.0))
        throw ParamError("potential: witness y must satisfy y > 0 and psi(y) > 0");
    } else {
      for (double y = 1.0; y < 1e12; y *= 2.0) {
        if (value(y) > 0.0) {
          witness_ = y;
          break;
        }
      }
      if (!witness_) throw ParamError("potential: sublinear potential vanishes identically");
    }
  }
}

std::optional<double> Potential::exponent_m() const noexcept {
  if (growth_ == GrowthClass::Superlinear) return 1.0;
  return std::nullopt;
}

bool Potential::piecewise_quadratic() const noexcept {
  return std::all_of(pieces_.begin(), pieces_.end(),
                     [](const Polynomial& q) { return q.degree() <= 2; });
}

std::size_t Potential::piece_index(double ax) const noexcept {
  const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), ax);
  return static_cast<std::size_t>(it - breaks_.begin());
}

double Potential::value(double x) const noexcept {
  const double ax = std::fabs(x);
  return pieces_[piece_index(ax)](ax);
}

SubdiffInterval Potential::subdiff(double x) const noexcept {
  const double ax = std::fabs(x);
  SubdiffInterval pos;
  if (ax == 0.0) {
    const double d = pieces_.front().derivative(0.0);
    return {-d, d};
  }
  const std::size_t k = piece_index(ax);
  // piece_index returns the piece to the right of a breakpoint
  if (k > 0 && breaks_[k - 1] == ax) {
    pos = {pieces_[k - 1].derivative(ax), pieces_[k].derivative(ax)};
  } else {
    const double d = pieces_[k].derivative(ax);
    pos = {d, d};
  }
  if (x < 0.0) return {-pos.upper, -pos.lower};
  return pos;
}

double Potential::curvature(double x) const noexcept {
  const double ax = std::fabs(x);
  return pieces_[piece_index(ax)].second_derivative(ax);
}

// ---------------------------------------------------------------------------
// Regularization

namespace {

// Segments of the resolvent x -> y on x >= 0. Over the piece with
// ψ'(y) = c1 + 2 c2 y the equation y + ε ψ'(y) = x is linear; over a kink at
// b the resolvent is constant b.
simd::PwlTable build_resolvent_table(const Potential& p, double eps) {
  simd::PwlTable t;
  auto push = [&t](double start, double slope, double intercept) {
    if (!t.start.empty() && t.start.back() == start) {
      t.slope.back() = slope;
      t.intercept.back() = intercept;
      return;
    }
    t.start.push_back(start);
    t.slope.push_back(slope);
    t.intercept.push_back(intercept);
  };
  const auto& br = p.breakpoints();
  const auto& pc = p.pieces();
  const double d0 = pc.front().derivative(0.0);
  if (d0 > 0.0) push(0.0, 0.0, 0.0);
  for (std::size_t k = 0; k < pc.size(); ++k) {
    const double lo = k == 0 ? 0.0 : br[k - 1];
    const double c1 = pc[k].coeffs.size() > 1 ? pc[k].coeffs[1] : 0.0;
    const double c2 = pc[k].coeffs.size() > 2 ? pc[k].coeffs[2] : 0.0;
    const double s = 1.0 / (1.0 + 2.0 * eps * c2);
    push(lo + eps * pc[k].derivative(lo), s, -eps * c1 * s);
    if (k + 1 < pc.size()) {
      const double b = br[k];
      const double left = b + eps * pc[k].derivative(b);
      const double right = b + eps * pc[k + 1].derivative(b);
      if (right > left) push(left, 0.0, b);
    }
  }
  return t;
}

}  // namespace

RegularizedPotential::RegularizedPotential(Potential base, double epsilon)
    : base_(std::move(base)), eps_(epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw ParamError("regularized potential: epsilon must be positive");
  if (base_.piecewise_quadratic()) {
    resolvent_ = build_resolvent_table(base_, eps_);
    simd::PwlTable y = *resolvent_;
    for (std::size_t k = 0; k < y.size(); ++k) {
      y.slope[k] = (1.0 - resolvent_->slope[k]) / eps_;
      y.intercept[k] = -resolvent_->intercept[k] / eps_;
    }
    yosida_ = std::move(y);
  }
}

void RegularizedPotential::apply_yosida(std::span<const double> x, std::span<double> phi,
                                        std::span<double> dphi) const {
  if (yosida_) {
    simd::odd_pwl(*yosida_, x, phi, dphi);
    return;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    phi[i] = yosida_phi_eps(*this, x[i]);
    dphi[i] = yosida_derivative(*this, x[i]);
  }
}

double eval_psi(const Potential& p, double x) noexcept { return p.value(x); }

SubdiffInterval eval_phi(const Potential& p, double x) noexcept { return p.subdiff(x); }

double resolvent_bisection(const RegularizedPotential& rp, double x) {
  if (std::isnan(x)) throw ConvergenceFailure("resolvent: NaN argument");
  if (x == 0.0) return 0.0;
  const Potential& p = rp.base();
  const double eps = rp.epsilon();
  const double ax = std::fabs(x);
  // 0 ≤ y ≤ |x| and φ(y) ≤ φ⁺(|x|), hence y ≥ |x| - ε φ⁺(|x|).
  double lo = std::max(0.0, ax - eps * p.subdiff(ax).upper);
  double hi = ax;
  for (int it = 0; it < 400; ++it) {
    if (hi - lo <= 1e-12) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // bracket at machine resolution
    const SubdiffInterval g = p.subdiff(mid);
    if (!std::isfinite(g.lower) || !std::isfinite(g.upper))
      throw ConvergenceFailure("resolvent: subdifferential is not finite");
    if (ax < mid + eps * g.lower) {
      hi = mid;
    } else if (ax > mid + eps * g.upper) {
      lo = mid;
    } else {
      return std::copysign(mid, x);
    }
  }
  if (!(hi - lo <= 1e-12 * std::max(1.0, ax)))
    throw ConvergenceFailure("resolvent: bisection bracket did not shrink");
  return std::copysign(0.5 * (lo + hi), x);
}

namespace {

std::size_t segment_of(const simd::PwlTable& t, double ax) {
  std::size_t k = 0;
  for (std::size_t j = 1; j < t.size(); ++j)
    if (ax >= t.start[j]) k = j;
  return k;
}

}  // namespace

double resolvent(const RegularizedPotential& rp, double x) {
  if (const auto& t = rp.resolvent_table()) {
    if (std::isnan(x)) throw ConvergenceFailure("resolvent: NaN argument");
    const double ax = std::fabs(x);
    const std::size_t k = segment_of(*t, ax);
    return std::copysign(t->slope[k] * ax + t->intercept[k], x);
  }
  return resolvent_bisection(rp, x);
}

double yosida_phi_eps(const RegularizedPotential& rp, double x) {
  return (x - resolvent(rp, x)) / rp.epsilon();
}

double yosida_derivative(const RegularizedPotential& rp, double x) {
  if (const auto& t = rp.yosida_table()) return t->slope[segment_of(*t, std::fabs(x))];
  const double eps = rp.epsilon();
  const double y = resolvent(rp, x);
  const SubdiffInterval g = rp.base().subdiff(y);
  // strictly inside the vertical part of the graph: resolvent is locally constant
  if (g.upper > g.lower) {
    const double slack = (x - y) / eps;
    if (slack > g.lower && slack < g.upper) return 1.0 / eps;
  }
  const double c = rp.base().curvature(y);
  return c / (1.0 + eps * c);
}

double moreau_psi_eps(const RegularizedPotential& rp, double x) {
  const double y = resolvent(rp, x);
  const double d = x - y;
  return rp.base().value(y) + d * d / (2.0 * rp.epsilon());
}

double conjugate(const Potential& p, double x) {
  const double v = std::fabs(x);
  const auto& br = p.breakpoints();
  const auto& pc = p.pieces();
  if (v <= pc.front().derivative(0.0)) return 0.0;
  for (std::size_t k = 0; k < pc.size(); ++k) {
    const bool last = k + 1 == pc.size();
    const double lo = k == 0 ? 0.0 : br[k - 1];
    if (v <= pc[k].derivative(lo)) return v * lo - p.value(lo);  // in the jump at lo
    const Polynomial& q = pc[k];
    double dr;
    if (!last) {
      dr = q.derivative(br[k]);
    } else {
      dr = q.degree() >= 2 ? kInf : q.derivative(lo);
    }
    if (v > dr) continue;
    double y;
    if (q.degree() <= 1) {
      y = lo;  // v equals the constant slope; every y on the piece attains the sup
    } else if (q.degree() == 2) {
      y = (v - q.coeffs[1]) / (2.0 * q.coeffs[2]);
    } else {
      double a = lo, b = br[k];
      for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, b); ++it) {
        const double m = 0.5 * (a + b);
        (q.derivative(m) < v ? a : b) = m;
      }
      y = 0.5 * (a + b);
    }
    y = std::max(y, lo);
    if (!last) y = std::min(y, br[k]);
    return std::max(0.0, v * y - p.value(y));
  }
  return kInf;
}

double recession(const Potential& p, double x) noexcept {
  if (x == 0.0) return 0.0;
  const double s = p.recession_slope();
  return std::isinf(s) ? kInf : s * std::fabs(x);
}

double recession_conjugate(const Potential& p, double x) {
  if (p.growth_class() != GrowthClass::Sublinear)
    throw GrowthClassError("recession_conjugate: potential is superlinear");
  return std::fabs(x) <= p.recession_slope() ? 0.0 : kInf;
}

// ---------------------------------------------------------------------------
// Serialization

std::string potential_to_json(const Potential& p) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(p.kind());
  j["breakpoints"] = p.breakpoints();
  nlohmann::json pieces = nlohmann::json::array();
  for (const auto& q : p.pieces()) pieces.push_back(q.coeffs);
  j["pieces"] = pieces;
  j["growth_class"] = to_string(p.growth_class());
  j["growth_constant"] = p.growth_constant();
  if (p.witness_y())
    j["witness_y"] = *p.witness_y();
  else
    j["witness_y"] = nullptr;
  return j.dump(2);
}

Potential potential_by_name(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  if (n == "psi1") return Potential::psi1();
  if (n == "psi2") return Potential::psi2();
  if (n == "quadratic") return Potential::quadratic();
  throw ParamError("unknown potential '" + name + "'");
}

Potential potential_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParamError(std::string("potential: malformed record: ") + e.what());
  }
  if (j.is_string()) return potential_by_name(j.get<std::string>());
  if (!j.is_object() || !j.contains("kind")) throw ParamError("potential: record needs a 'kind'");
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind != "CUSTOM" && kind != "custom") {
      Potential p = potential_by_name(kind);
      if (j.contains("growth_class") &&
          j["growth_class"].get<std::string>() != to_string(p.growth_class()))
        throw ParamError("potential: growth_class disagrees with builtin kind");
      return p;
    }
    std::vector<double> br = j.value("breakpoints", std::vector<double>{});
    std::vector<Polynomial> pieces;
    for (const auto& c : j.at("pieces")) pieces.push_back(Polynomial{c.get<std::vector<double>>()});
    std::optional<double> witness;
    if (j.contains("witness_y") && !j["witness_y"].is_null()) witness = j["witness_y"].get<double>();
    if (!j.contains("growth_constant"))
      throw ParamError("potential: CUSTOM potentials must declare growth_constant");
    Potential p = Potential::custom(std::move(br), std::move(pieces),
                                    j["growth_constant"].get<double>(), witness);
    if (j.contains("growth_class") &&
        j["growth_class"].get<std::string>() != to_string(p.growth_class()))
      throw ParamError("potential: declared growth_class does not match the pieces");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParamError(std::string("potential: ") + e.what());
  }
}

}  // namespace svilab
