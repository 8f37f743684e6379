#include <cstdlib>
#include <string_view>

#include "svilab/simd/kernels.hpp"

namespace svilab::simd {

const KernelSet& active() noexcept {
  static const KernelSet& chosen = []() -> const KernelSet& {
    const char* env = std::getenv("SVILAB_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernels();
    if (const KernelSet* k = avx2_kernels()) return *k;
    return scalar_kernels();
  }();
  return chosen;
}

}  // namespace svilab::simd
