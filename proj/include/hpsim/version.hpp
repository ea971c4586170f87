#ifndef HPSIM_VERSION_HPP
#define HPSIM_VERSION_HPP

namespace hpsim {

inline constexpr const char* kToolVersion = "hpsim 0.1.0";

}  // namespace hpsim

#endif  // HPSIM_VERSION_HPP
