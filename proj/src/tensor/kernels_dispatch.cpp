#include <atomic>
#include <cstdlib>
#include <string>

#include "map2seq/errors.hpp"
#include "map2seq/tensor/kernels.hpp"

namespace map2seq::tensor::kernels {
namespace {

Isa initial_isa() {
    Isa isa = detected_isa();
    if (const char* env = std::getenv("MAP2SEQ_ISA")) {
        std::string v(env);
        if (v == "scalar") return Isa::kScalar;
        if (v == "avx2" && isa_available(Isa::kAvx2)) return Isa::kAvx2;
    }
    return isa;
}

std::atomic<Isa>& active_slot() {
    static std::atomic<Isa> slot{initial_isa()};
    return slot;
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

Isa detected_isa() { return isa_available(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar; }

bool isa_available(Isa isa) {
    switch (isa) {
        case Isa::kScalar:
            return true;
        case Isa::kAvx2:
#if defined(MAP2SEQ_HAVE_AVX2_KERNELS)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
    }
    return false;
}

template <typename T>
const KernelTable<T>& table(Isa isa) {
#if defined(MAP2SEQ_HAVE_AVX2_KERNELS)
    if (isa == Isa::kAvx2) {
        if (!isa_available(Isa::kAvx2)) throw Error("unsupported_isa", "avx2 kernels unavailable on this cpu");
        return avx2::table<T>();
    }
#endif
    if (isa != Isa::kScalar) throw Error("unsupported_isa", "kernel isa not compiled in");
    return scalar::table<T>();
}

template <typename T>
const KernelTable<T>& active() {
    return table<T>(active_slot().load(std::memory_order_relaxed));
}

void set_active_isa(Isa isa) {
    if (!isa_available(isa)) throw Error("unsupported_isa", std::string(isa_name(isa)) + " unavailable");
    active_slot().store(isa);
}

Isa active_isa() { return active_slot().load(); }

template const KernelTable<float>& table<float>(Isa);
template const KernelTable<double>& table<double>(Isa);
template const KernelTable<float>& active<float>();
template const KernelTable<double>& active<double>();

}  // namespace map2seq::tensor::kernels
