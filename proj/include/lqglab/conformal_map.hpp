#pragma once

#include <complex>
#include <vector>

namespace lqglab {

/// Conformal maps used for LQG coordinate changes. A map is a composition of
/// elementary pieces; evaluation applies the last-composed piece first.
class ConformalMap {
 public:
  using Complex = std::complex<double>;

  enum class Kind { identity, mobius_disk_automorphism, strip_to_disk, disk_to_strip };

  struct Piece {
    Kind kind = Kind::identity;
    Complex z{0.0, 0.0};       // image of 0 (Mobius)
    Complex w{1.0, 0.0};       // image of 1 (Mobius)
    Complex rotation{1.0, 0.0};
  };

  ConformalMap() = default;

  static ConformalMap identity() { return {}; }
  /// Unique automorphism of the unit disk with f(0) = z and f(1) = w.
  /// Throws ConfigError unless |z| < 1 and |w| = 1 (to 1e-9).
  static ConformalMap mobius_disk(Complex z, Complex w);
  /// R x (0, 2 pi) -> unit disk, -inf -> -1 and +inf -> +1.
  static ConformalMap strip_to_disk();
  /// Inverse of strip_to_disk.
  static ConformalMap disk_to_strip();

  /// (*this) o inner.
  ConformalMap compose(const ConformalMap& inner) const;
  /// Inverse map; every elementary piece used here is invertible.
  ConformalMap inverse() const;

  Complex operator()(Complex p) const;
  Complex derivative(Complex p) const;

  bool is_identity() const;
  Kind kind() const;
  const std::vector<Piece>& pieces() const { return pieces_; }

 private:
  explicit ConformalMap(Piece p) : pieces_{p} {}
  std::vector<Piece> pieces_;  // applied back to front
};

}  // namespace lqglab
