#include <atomic>
#include <cstdlib>
#include <string_view>

#include "skelact/kernels.hpp"

namespace skelact::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(SKELACT_HAVE_AVX2) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* lookup(std::string_view name) {
  if (name == "scalar") return &scalar_table();
#if defined(SKELACT_HAVE_AVX2)
  if (name == "avx2" && cpu_has_avx2()) return &avx2_table();
#endif
  return nullptr;
}

const KernelTable* pick_default() {
  if (const char* env = std::getenv("SKELACT_KERNELS")) {
    if (const KernelTable* t = lookup(env)) return t;
  }
#if defined(SKELACT_HAVE_AVX2)
  if (cpu_has_avx2()) return &avx2_table();
#endif
  return &scalar_table();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{pick_default()};
  return slot;
}

}  // namespace

const KernelTable& active() { return *active_slot().load(std::memory_order_relaxed); }

bool set_backend(std::string_view name) {
  if (const KernelTable* t = lookup(name)) {
    active_slot().store(t, std::memory_order_relaxed);
    return true;
  }
  return false;
}

std::vector<std::string_view> available_backends() {
  std::vector<std::string_view> out{"scalar"};
#if defined(SKELACT_HAVE_AVX2)
  if (cpu_has_avx2()) out.push_back("avx2");
#endif
  return out;
}

}  // namespace skelact::kernels
