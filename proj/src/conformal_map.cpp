#include "lqglab/conformal_map.hpp"

#include <cmath>

#include "lqglab/errors.hpp"

namespace lqglab {

namespace {

using Complex = ConformalMap::Complex;
constexpr Complex kI{0.0, 1.0};

// Mobius piece: f(p) = (rot p + z) / (1 + conj(z) rot p).
Complex mobius_eval(const ConformalMap::Piece& m, Complex p) {
  const Complex rp = m.rotation * p;
  return (rp + m.z) / (1.0 + std::conj(m.z) * rp);
}

Complex mobius_deriv(const ConformalMap::Piece& m, Complex p) {
  const Complex denom = 1.0 + std::conj(m.z) * m.rotation * p;
  return m.rotation * (1.0 - std::norm(m.z)) / (denom * denom);
}

Complex eval_piece(const ConformalMap::Piece& piece, Complex p) {
  switch (piece.kind) {
    case ConformalMap::Kind::identity:
      return p;
    case ConformalMap::Kind::mobius_disk_automorphism:
      return mobius_eval(piece, p);
    case ConformalMap::Kind::strip_to_disk: {
      const Complex e = std::exp(p / 2.0);
      return (e - kI) / (e + kI);
    }
    case ConformalMap::Kind::disk_to_strip:
      return 2.0 * std::log(kI * (1.0 + p) / (1.0 - p));
  }
  return p;
}

Complex deriv_piece(const ConformalMap::Piece& piece, Complex p) {
  switch (piece.kind) {
    case ConformalMap::Kind::identity:
      return 1.0;
    case ConformalMap::Kind::mobius_disk_automorphism:
      return mobius_deriv(piece, p);
    case ConformalMap::Kind::strip_to_disk: {
      const Complex e = std::exp(p / 2.0);
      return kI * e / ((e + kI) * (e + kI));
    }
    case ConformalMap::Kind::disk_to_strip:
      return 4.0 / (1.0 - p * p);
  }
  return 1.0;
}

}  // namespace

ConformalMap ConformalMap::mobius_disk(Complex z, Complex w) {
  if (!(std::abs(z) < 1.0)) throw ConfigError("mobius_disk: |Z| must be < 1");
  if (std::abs(std::abs(w) - 1.0) > 1e-9) throw ConfigError("mobius_disk: |W| must equal 1");
  if (z == Complex(0.0, 0.0) && w == Complex(1.0, 0.0)) return identity();
  Piece p;
  p.kind = Kind::mobius_disk_automorphism;
  p.z = z;
  p.w = w;
  p.rotation = (w - z) / (1.0 - w * std::conj(z));
  p.rotation /= std::abs(p.rotation);
  return ConformalMap(p);
}

ConformalMap ConformalMap::strip_to_disk() { return ConformalMap(Piece{Kind::strip_to_disk}); }
ConformalMap ConformalMap::disk_to_strip() { return ConformalMap(Piece{Kind::disk_to_strip}); }

ConformalMap ConformalMap::compose(const ConformalMap& inner) const {
  ConformalMap out;
  out.pieces_ = pieces_;
  out.pieces_.insert(out.pieces_.end(), inner.pieces_.begin(), inner.pieces_.end());
  return out;
}

ConformalMap ConformalMap::inverse() const {
  ConformalMap out;
  for (auto it = pieces_.rbegin(); it != pieces_.rend(); ++it) {
    Piece p = *it;
    switch (p.kind) {
      case Kind::identity:
        break;
      case Kind::strip_to_disk:
        p.kind = Kind::disk_to_strip;
        break;
      case Kind::disk_to_strip:
        p.kind = Kind::strip_to_disk;
        break;
      case Kind::mobius_disk_automorphism: {
        // f^{-1}(q) = conj(rot) (q - z) / (1 - conj(z) q)
        //           = (rot' q + z') / (1 + conj(z') rot' q), z' = -conj(rot) z, rot' = conj(rot).
        Piece inv;
        inv.kind = Kind::mobius_disk_automorphism;
        inv.rotation = std::conj(p.rotation);
        inv.z = -std::conj(p.rotation) * p.z;
        inv.w = 1.0;
        p = inv;
        break;
      }
    }
    out.pieces_.push_back(p);
  }
  return out;
}

Complex ConformalMap::operator()(Complex p) const {
  for (auto it = pieces_.rbegin(); it != pieces_.rend(); ++it) p = eval_piece(*it, p);
  return p;
}

Complex ConformalMap::derivative(Complex p) const {
  Complex d = 1.0;
  for (auto it = pieces_.rbegin(); it != pieces_.rend(); ++it) {
    d *= deriv_piece(*it, p);
    p = eval_piece(*it, p);
  }
  return d;
}

bool ConformalMap::is_identity() const {
  for (const auto& p : pieces_) {
    if (p.kind != Kind::identity) return false;
  }
  return true;
}

ConformalMap::Kind ConformalMap::kind() const {
  if (is_identity()) return Kind::identity;
  return pieces_.size() == 1 ? pieces_.front().kind : Kind::mobius_disk_automorphism;
}

}  // namespace lqglab
