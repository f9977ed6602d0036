#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>

#include "pmhmc/rng.hpp"

namespace pmhmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Shape of the auxiliary block: T data items, N importance samples, p dims per draw.
struct AuxShape {
  std::size_t data_count = 0;
  std::size_t samples = 0;
  std::size_t latent_dim = 0;

  std::size_t size() const { return data_count * samples * latent_dim; }
  std::size_t datum_size() const { return samples * latent_dim; }
  bool operator==(const AuxShape&) const = default;
};

/// The auxiliary variables u (or their momenta p), stored flat with layout
/// index(k, i, j) = (k * N + i) * p + j. The block of datum k is a p x N
/// column-major matrix whose column i is draw i.
class AuxiliaryBlock {
 public:
  AuxiliaryBlock() = default;
  explicit AuxiliaryBlock(AuxShape shape) : shape_(shape), values_(Vector::Zero(static_cast<Eigen::Index>(shape.size()))) {}
  AuxiliaryBlock(AuxShape shape, Vector values) : shape_(shape), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != shape_.size())
      throw std::invalid_argument("AuxiliaryBlock: value count does not match T*N*p");
  }

  static AuxiliaryBlock standard_normal(AuxShape shape, Rng& rng) {
    AuxiliaryBlock b(shape);
    for (Eigen::Index i = 0; i < b.values_.size(); ++i) b.values_[i] = rng.normal();
    return b;
  }

  const AuxShape& shape() const { return shape_; }
  std::size_t size() const { return shape_.size(); }

  Vector& flat() { return values_; }
  const Vector& flat() const { return values_; }

  Eigen::Map<const Matrix> datum(std::size_t k) const {
    return {values_.data() + k * shape_.datum_size(), static_cast<Eigen::Index>(shape_.latent_dim),
            static_cast<Eigen::Index>(shape_.samples)};
  }
  Eigen::Map<Matrix> datum(std::size_t k) {
    return {values_.data() + k * shape_.datum_size(), static_cast<Eigen::Index>(shape_.latent_dim),
            static_cast<Eigen::Index>(shape_.samples)};
  }

  double& at(std::size_t k, std::size_t i, std::size_t j) {
    return values_[static_cast<Eigen::Index>((k * shape_.samples + i) * shape_.latent_dim + j)];
  }
  double at(std::size_t k, std::size_t i, std::size_t j) const {
    return values_[static_cast<Eigen::Index>((k * shape_.samples + i) * shape_.latent_dim + j)];
  }

  double squared_norm() const { return values_.squaredNorm(); }
  bool all_finite() const { return values_.allFinite(); }

 private:
  AuxShape shape_;
  Vector values_;
};

using AuxMomentum = AuxiliaryBlock;

/// Full phase point (theta, rho, u, p).
struct ExtendedState {
  Vector theta;
  Vector rho;
  AuxiliaryBlock u;
  AuxMomentum p;

  void check_consistent() const {
    if (theta.size() != rho.size())
      throw std::invalid_argument("ExtendedState: theta and rho dimensions differ");
    if (!(u.shape() == p.shape()))
      throw std::invalid_argument("ExtendedState: u and p shapes differ");
  }

  /// Packs (theta, rho, u, p) into one vector, in that order.
  Vector pack() const;
  /// Inverse of pack(), using this state's dimensions.
  void unpack(const Vector& flat);
  Eigen::Index packed_size() const { return 2 * theta.size() + 2 * static_cast<Eigen::Index>(u.size()); }
};

inline Vector ExtendedState::pack() const {
  Vector out(packed_size());
  const Eigen::Index d = theta.size();
  const auto D = static_cast<Eigen::Index>(u.size());
  out.segment(0, d) = theta;
  out.segment(d, d) = rho;
  out.segment(2 * d, D) = u.flat();
  out.segment(2 * d + D, D) = p.flat();
  return out;
}

inline void ExtendedState::unpack(const Vector& flat) {
  const Eigen::Index d = theta.size();
  const auto D = static_cast<Eigen::Index>(u.size());
  if (flat.size() != 2 * d + 2 * D) throw std::invalid_argument("ExtendedState::unpack: size mismatch");
  theta = flat.segment(0, d);
  rho = flat.segment(d, d);
  u.flat() = flat.segment(2 * d, D);
  p.flat() = flat.segment(2 * d + D, D);
}

}  // namespace pmhmc
