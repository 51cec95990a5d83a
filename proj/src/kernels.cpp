#include "bib/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace bib::kern {

namespace scalar_impl {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matvec(const double* a, std::size_t m, std::size_t n, const double* x, double* y) {
  for (std::size_t r = 0; r < m; ++r) y[r] = dot(a + r * n, x, n);
}

void matvec3(const double* a, std::size_t m, std::size_t n,
             const double* x0, const double* x1, const double* x2,
             double* y0, double* y1, double* y2) {
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = a + r * n;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = row[i];
      s0 += v * x0[i];
      s1 += v * x1[i];
      s2 += v * x2[i];
    }
    y0[r] = s0;
    y1[r] = s1;
    y2[r] = s2;
  }
}

}  // namespace scalar_impl

#if defined(__x86_64__) || defined(_M_X64)
#define BIB_HAVE_X86_KERNELS 1
namespace avx2_impl {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void matvec(const double* a, std::size_t m, std::size_t n, const double* x, double* y);
void matvec3(const double* a, std::size_t m, std::size_t n,
             const double* x0, const double* x1, const double* x2,
             double* y0, double* y1, double* y2);
}  // namespace avx2_impl
namespace avx512_impl {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void matvec(const double* a, std::size_t m, std::size_t n, const double* x, double* y);
void matvec3(const double* a, std::size_t m, std::size_t n,
             const double* x0, const double* x1, const double* x2,
             double* y0, double* y1, double* y2);
}  // namespace avx512_impl
#endif

namespace {

struct Vtable {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*matvec)(const double*, std::size_t, std::size_t, const double*, double*);
  void (*matvec3)(const double*, std::size_t, std::size_t, const double*, const double*,
                  const double*, double*, double*, double*);
};

constexpr Vtable kScalar{scalar_impl::dot, scalar_impl::axpy, scalar_impl::matvec,
                         scalar_impl::matvec3};
#ifdef BIB_HAVE_X86_KERNELS
constexpr Vtable kAvx2{avx2_impl::dot, avx2_impl::axpy, avx2_impl::matvec, avx2_impl::matvec3};
constexpr Vtable kAvx512{avx512_impl::dot, avx512_impl::axpy, avx512_impl::matvec,
                         avx512_impl::matvec3};
#endif

const Vtable* table_for(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return &kScalar;
#ifdef BIB_HAVE_X86_KERNELS
    case Isa::avx2:
      return &kAvx2;
    case Isa::avx512:
      return &kAvx512;
#else
    default:
      break;
#endif
  }
  return &kScalar;
}

Isa pick_initial_isa() {
  if (const char* env = std::getenv("BIB_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2" && isa_supported(Isa::avx2)) return Isa::avx2;
    if (v == "avx512" && isa_supported(Isa::avx512)) return Isa::avx512;
  }
  return best_supported_isa();
}

Isa g_isa = pick_initial_isa();
const Vtable* g_table = table_for(g_isa);

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
#ifdef BIB_HAVE_X86_KERNELS
    case Isa::avx2:
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    case Isa::avx512:
      return __builtin_cpu_supports("avx512f");
#else
    default:
      return false;
#endif
  }
  return false;
}

Isa best_supported_isa() {
  if (isa_supported(Isa::avx512)) return Isa::avx512;
  if (isa_supported(Isa::avx2)) return Isa::avx2;
  return Isa::scalar;
}

Isa active_isa() { return g_isa; }

void set_isa(Isa isa) {
  if (!isa_supported(isa)) throw std::invalid_argument("kernel ISA not supported on this CPU");
  g_isa = isa;
  g_table = table_for(isa);
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::avx512:
      return "avx512";
  }
  return "unknown";
}

double dot(const double* a, const double* b, std::size_t n) { return g_table->dot(a, b, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  g_table->axpy(alpha, x, y, n);
}

void matvec(const double* a, std::size_t m, std::size_t n, const double* x, double* y) {
  g_table->matvec(a, m, n, x, y);
}

void matvec3(const double* a, std::size_t m, std::size_t n, const double* x0, const double* x1,
             const double* x2, double* y0, double* y1, double* y2) {
  g_table->matvec3(a, m, n, x0, x1, x2, y0, y1, y2);
}

}  // namespace bib::kern
