#pragma once

#include <cstddef>
#include <string_view>

// Arithmetic primitives behind the numeric hot paths (feature maps, Gram
// matrices, ridge solves, enumeration). Every primitive has a scalar
// reference implementation plus SIMD variants; the active variant is picked
// once from CPUID, can be forced with the BIB_KERNELS environment variable
// (scalar|avx2|avx512) or set_isa(), and is equivalence-tested against the
// scalar reference.
//
// The scalar reference accumulates strictly in element order. SIMD variants
// use fixed lane-blocked accumulation, so results may differ from scalar in
// the last bits but are identical from call to call on a given ISA.

namespace bib::kern {

enum class Isa { scalar, avx2, avx512 };

bool isa_supported(Isa isa);
Isa best_supported_isa();
Isa active_isa();
void set_isa(Isa isa);  // throws std::invalid_argument if unsupported; not thread-safe
std::string_view isa_name(Isa isa);

double dot(const double* a, const double* b, std::size_t n);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

// y = A x for row-major A of shape m x n
void matvec(const double* a, std::size_t m, std::size_t n, const double* x, double* y);

// y_k = A x_k for three right-hand sides in a single pass over A
void matvec3(const double* a, std::size_t m, std::size_t n,
             const double* x0, const double* x1, const double* x2,
             double* y0, double* y1, double* y2);

}  // namespace bib::kern
