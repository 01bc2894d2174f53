#include <algorithm>
#include <chrono>
#include <fstream>

#include "dcv/demos.hpp"
#include "dcv/filters.hpp"
#include "dcv/rng.hpp"

namespace dcv {

BenchOp parse_bench_op(std::string_view name) {
  if (name == "sobel") return BenchOp::sobel;
  if (name == "gaussian") return BenchOp::gaussian;
  if (name == "warp") return BenchOp::warp;
  throw ParameterError("unknown bench op '" + std::string(name) + "' (sobel, gaussian, warp)");
}

namespace {

Tensor noise(std::int64_t n, std::int64_t size, std::uint64_t seed) {
  Tensor t(Shape{n, 3, size, size}, DType::f32);
  Rng rng(seed);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, rng.uniform(0.0, 1.0));
  return t;
}

}  // namespace

std::vector<BenchRow> bench(BenchOp op, std::span<const std::int64_t> batches, std::int64_t size, int repeats) {
  if (repeats < 3) throw ParameterError("bench: repeats must be >= 3");
  if (size < 8) throw ParameterError("bench: size must be >= 8");
  const Mat3 h = lift_affine(get_rotation_matrix2d(Vec2(0.5 * (size - 1), 0.5 * (size - 1)), 10.0, 1.05));
  const Var hv(to_tensor(h, DType::f32));

  std::vector<BenchRow> rows;
  for (const std::int64_t n : batches) {
    if (n < 1) throw ParameterError("bench: batch sizes must be >= 1");
    const Var x(noise(n, size, static_cast<std::uint64_t>(n)));
    auto run = [&] {
      switch (op) {
        case BenchOp::sobel: return sobel_edges(x);
        case BenchOp::gaussian: return gaussian_blur2d(x, 5, 5, 1.5, 1.5);
        case BenchOp::warp: return warp_perspective(x, hv, size, size);
      }
      return x;
    };
    for (int i = 0; i < 3; ++i) run();
    std::vector<double> ms;
    for (int i = 0; i < repeats; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      const Var y = run();
      ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    std::ranges::nth_element(ms, ms.begin() + ms.size() / 2);
    const double med = ms[ms.size() / 2];
    rows.push_back({n, med, med / static_cast<double>(n)});
  }
  return rows;
}

void write_bench_csv(const std::filesystem::path& path, std::span<const BenchRow> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(8);
  out << "batch,median_ms,per_sample_ms\n";
  for (const auto& r : rows) out << r.batch << ',' << r.median_ms << ',' << r.per_sample_ms << '\n';
}

}  // namespace dcv
