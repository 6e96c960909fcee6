#include "fourthdown/kernels.hpp"

#include <algorithm>

#include <omp.h>

namespace fourthdown {

namespace {

void accumulate_feature(const BinnedMatrix& m, std::size_t c, std::span<const std::uint32_t> rows,
                        std::span<const GradPair> gh, std::span<GradPair> out) {
  GradPair* hist = out.data() + m.offsets[c];
  std::fill(hist, out.data() + m.offsets[c + 1], GradPair{});
  const std::uint16_t* col = m.codes.data() + c * m.rows;
  for (std::uint32_t r : rows) {
    GradPair& cell = hist[col[r]];
    cell.g += gh[r].g;
    cell.h += gh[r].h;
  }
}

}  // namespace

void build_histogram_serial(const BinnedMatrix& m, std::span<const std::uint32_t> rows,
                            std::span<const GradPair> gh, std::span<GradPair> out) {
  for (std::size_t c = 0; c < m.cols; ++c) accumulate_feature(m, c, rows, gh, out);
}

void build_histogram_parallel(const BinnedMatrix& m, std::span<const std::uint32_t> rows,
                              std::span<const GradPair> gh, std::span<GradPair> out) {
  const auto cols = static_cast<long>(m.cols);
  // one feature per task keeps the per-bin summation order identical to the serial loop
#pragma omp parallel for schedule(static) if (rows.size() * m.cols > 20000)
  for (long c = 0; c < cols; ++c) accumulate_feature(m, static_cast<std::size_t>(c), rows, gh, out);
}

void subtract_histogram(std::span<const GradPair> parent, std::span<const GradPair> child,
                        std::span<GradPair> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {parent[i].g - child[i].g, parent[i].h - child[i].h};
}

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

}  // namespace fourthdown
