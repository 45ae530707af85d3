#include "evogan/networks.hpp"

namespace evogan {

void NetworkSpec::validate() const {
  latent.validate();
  if (image.channels < 1 || image.height < 4 || image.width < 4 || image.height % 4 != 0 ||
      image.width % 4 != 0) {
    throw std::invalid_argument("network: image size must be a positive multiple of 4, got " +
                                to_string(image));
  }
  if (g_hidden < 1 || g_base_channels < 1 || g_mid_channels < 1 || d_channels1 < 1 ||
      d_channels2 < 1 || d_hidden < 1 || q_hidden < 1) {
    throw std::invalid_argument("network: layer widths must be positive");
  }
}

} // namespace evogan
