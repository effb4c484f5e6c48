#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"

namespace digcrowd::simd {

namespace {

const KernelTable kScalarTable{
    Isa::Scalar,         scalar::assign_row, scalar::squared_distances, scalar::axpy,
    scalar::masked_axpy, scalar::masked_sum, scalar::sum,
};

#if defined(DIGCROWD_HAVE_AVX2)
const KernelTable kAvx2Table{
    Isa::Avx2,         avx2::assign_row, avx2::squared_distances, avx2::axpy,
    avx2::masked_axpy, avx2::masked_sum, avx2::sum,
};

bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
}
#endif

const KernelTable* table_for(Isa isa) {
  if (isa == Isa::Avx2) return avx2_kernels();
  return &kScalarTable;
}

const KernelTable* initial_table() {
  Isa isa = best_available_isa();
  if (const char* env = std::getenv("DIGCROWD_SIMD")) {
    if (auto requested = parse_isa(env)) isa = *requested;
  }
  const KernelTable* t = table_for(isa);
  return t ? t : &kScalarTable;
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

std::string_view to_string(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

std::optional<Isa> parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::Scalar;
  if (name == "avx2") return Isa::Avx2;
  return std::nullopt;
}

const KernelTable& scalar_kernels() { return kScalarTable; }

const KernelTable* avx2_kernels() {
#if defined(DIGCROWD_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

Isa best_available_isa() { return avx2_kernels() ? Isa::Avx2 : Isa::Scalar; }

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

Isa select_isa(Isa isa) {
  const KernelTable* t = table_for(isa);
  if (!t) t = &kScalarTable;
  active().store(t, std::memory_order_release);
  return t->isa;
}

}  // namespace digcrowd::simd
