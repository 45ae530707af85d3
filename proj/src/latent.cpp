#include "evogan/latent.hpp"

namespace evogan {

void LatentSpec::validate() const {
  if (z_dim < 1) {
    throw std::invalid_argument("latent: z_dim must be >= 1");
  }
  if (n_categorical < 0 || n_classes < 0 || n_continuous < 0) {
    throw std::invalid_argument("latent: code counts must be non-negative");
  }
  if (n_categorical > 0 && n_classes < 1) {
    throw std::invalid_argument("latent: categorical codes need n_classes >= 1");
  }
}

} // namespace evogan
