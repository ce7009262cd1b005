#include <atomic>
#include <cstdlib>
#include <string>

#include "styletopo/simd/kernels.hpp"

namespace styletopo::simd {

#if !defined(STYLETOPO_HAVE_AVX2)
const KernelTable* avx2_kernels() { return nullptr; }
#endif

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(STYLETOPO_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return avx2_kernels() != nullptr && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa detect_isa() {
  if (const char* env = std::getenv("STYLETOPO_ISA")) {
    const std::string want(env);
    if (want == "scalar") return Isa::Scalar;
    if (want == "avx2" && cpu_supports(Isa::Avx2)) return Isa::Avx2;
  }
  return cpu_supports(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

namespace {

const KernelTable* table_for(Isa isa) {
  if (isa == Isa::Avx2 && cpu_supports(Isa::Avx2)) return avx2_kernels();
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{table_for(detect_isa())};
  return table;
}

}  // namespace

const KernelTable& kernels() { return *active().load(std::memory_order_relaxed); }

void select_isa(Isa isa) { active().store(table_for(isa), std::memory_order_relaxed); }

Isa active_isa() { return kernels().isa; }

}  // namespace styletopo::simd
