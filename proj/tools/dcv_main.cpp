#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dcv/demos.hpp"
#include "dcv/errors.hpp"
#include "dcv/image_io.hpp"
#include "dcv/synthetic.hpp"

namespace fs = std::filesystem;
using namespace dcv;

namespace {

enum Exit : int { ok = 0, usage = 1, bad_input = 2, failed = 3, internal = 4 };

constexpr const char* kExitHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  1  bad command line\n"
    "  2  bad input (unreadable file, wrong image size, invalid parameter)\n"
    "  3  the optimization or estimation failed (NaN loss, no keypoints, no consensus)\n"
    "  4  unexpected internal error\n";

// Three rows of three numbers, row-major.
Mat3 read_mat3(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Mat3 h;
  for (int i = 0; i < 9; ++i)
    if (!(in >> h(i / 3, i % 3))) throw IoError("expected 9 numbers in " + path.string());
  return h;
}

void write_mat3(const fs::path& path, const Mat3& h) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  for (int i = 0; i < 3; ++i) out << h(i, 0) << ' ' << h(i, 1) << ' ' << h(i, 2) << '\n';
}

void prepare_out(const RunConfig& c) {
  if (!c.out_dir.empty()) fs::create_directories(c.out_dir);
}

struct Common {
  RunConfig config;
  std::string optim;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.config.seed, "random seed")->capture_default_str();
  cmd->add_option("--levels", c.config.levels, "pyramid levels")->capture_default_str();
  cmd->add_option("--iters", c.config.iters, "iterations per level")->capture_default_str();
  cmd->add_option("--lr", c.config.optim.lr, "learning rate")->capture_default_str();
  cmd->add_option("--optim", c.optim, "optimizer: adam | sgd")->capture_default_str();
  cmd->add_option("--momentum", c.config.optim.momentum, "SGD momentum")->capture_default_str();
  cmd->add_option("--alpha", c.config.alpha, "loss weight alpha")->capture_default_str();
  cmd->add_option("--lambda", c.config.lambda, "loss weight lambda")->capture_default_str();
  cmd->add_option("--beta", c.config.beta, "loss weight beta")->capture_default_str();
  cmd->add_option("--out", c.config.out_dir, "output directory (created if missing)");
  cmd->add_flag("-v,--verbose", c.config.verbose, "print progress to stderr");
}

RunConfig finish(Common& c) {
  c.config.optim.kind = parse_optimizer(c.optim);
  c.config.validate();
  prepare_out(c.config);
  return c.config;
}

int run_register(Common& c, const fs::path& src_path, const fs::path& dst_path) {
  const RunConfig cfg = finish(c);
  const Tensor src = read_image(src_path), dst = read_image(dst_path);
  const RegisterResult r = register_homography(src, dst, cfg);
  std::cout << std::setprecision(10);
  for (int i = 0; i < 3; ++i) std::cout << r.homography(i, 0) << ' ' << r.homography(i, 1) << ' ' << r.homography(i, 2) << '\n';
  std::cout << "loss " << r.initial_loss << " -> " << r.final_loss << '\n';
  if (!cfg.out_dir.empty()) write_mat3(cfg.out_dir / "homography.txt", r.homography);
  return ok;
}

int run_depth(Common& c, const std::vector<std::string>& inputs, std::size_t ref, bool synthetic,
              const std::vector<std::int64_t>& size, double plane_z, double baseline) {
  const RunConfig cfg = finish(c);
  std::vector<View> views;
  if (synthetic) {
    if (!inputs.empty()) throw UsageError("--synthetic takes no input files");
    views = synthetic_plane_views(size[1], size[0], plane_z, baseline, cfg.seed);
    if (!cfg.out_dir.empty()) {
      for (std::size_t i = 0; i < views.size(); ++i) {
        const char* ext = views[i].image.size(1) == 3 ? ".ppm" : ".pgm";
        write_image(cfg.out_dir / ("view" + std::to_string(i) + ext), views[i].image);
        write_camera(cfg.out_dir / ("view" + std::to_string(i) + ".cam"), views[i].camera);
      }
    }
  } else {
    if (inputs.size() < 4 || inputs.size() % 2 != 0) throw UsageError("depth: expected IMAGE CAMERA pairs for at least two views");
    for (std::size_t i = 0; i < inputs.size(); i += 2) {
      Tensor img = read_image(inputs[i]);
      PinholeCamera cam = read_camera(inputs[i + 1], img.size(2), img.size(3));
      views.push_back({std::move(img), cam});
    }
  }
  const DepthResult r = estimate_depth(views, ref, cfg);
  std::vector<double> d = r.depth.to_vector();
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  std::cout << "median depth " << d[d.size() / 2] << '\n';
  std::cout << "loss " << r.initial_loss << " -> " << r.final_loss << '\n';
  if (r.degenerate) std::cout << "degenerate: no baseline\n";
  return ok;
}

int run_attack(Common& c, const std::vector<std::string>& inputs, const std::string& h_path, bool synthetic,
               const AttackOptions& options) {
  const RunConfig cfg = finish(c);
  Tensor a, b;
  Mat3 h;
  if (synthetic) {
    if (!inputs.empty() || !h_path.empty()) throw UsageError("--synthetic takes no input files");
    a = textured_image(128, 128, 1, 100 + 2 * cfg.seed);
    b = textured_image(128, 128, 1, 101 + 2 * cfg.seed);
    Affine23 m = get_rotation_matrix2d(Vec2(63.5, 63.5), 5.0, 1.0);
    m(0, 2) += 4;
    m(1, 2) -= 3;
    h = lift_affine(m);
    if (!cfg.out_dir.empty()) {
      write_image(cfg.out_dir / "input_a.pgm", a);
      write_image(cfg.out_dir / "input_b.pgm", b);
      write_mat3(cfg.out_dir / "target.txt", h);
    }
  } else {
    if (inputs.size() != 2 || h_path.empty()) throw UsageError("attack: expected IMAGE_A IMAGE_B and --homography");
    a = read_image(inputs[0]);
    b = read_image(inputs[1]);
    h = read_mat3(h_path);
  }
  const AttackResult r = attack(a, b, h, cfg, options);
  std::cout << "verified matches " << r.matches_before << " -> " << r.matches_after << '\n';
  return ok;
}

int run_bench(const std::string& op, const std::vector<std::int64_t>& batches, std::int64_t size, int repeats,
              const fs::path& out) {
  const auto rows = bench(parse_bench_op(op), batches, size, repeats);
  std::cout << "batch,median_ms,per_sample_ms\n";
  for (const auto& r : rows) std::cout << r.batch << ',' << r.median_ms << ',' << r.per_sample_ms << '\n';
  if (!out.empty()) {
    fs::create_directories(out);
    write_bench_csv(out / "bench.csv", rows);
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable image processing demos"};
  app.footer(kExitHelp);
  app.require_subcommand(1);

  Common reg{register_defaults(), "adam"};
  std::string src, dst;
  auto* r_cmd = app.add_subcommand("register", "align SRC onto DST with a coarse-to-fine homography");
  r_cmd->add_option("src", src, "source image (PGM/PPM)")->required()->check(CLI::ExistingFile);
  r_cmd->add_option("dst", dst, "target image (PGM/PPM)")->required()->check(CLI::ExistingFile);
  add_common(r_cmd, reg);

  Common dep{depth_defaults(), "sgd"};
  std::vector<std::string> views;
  std::size_t ref = 0;
  bool dep_synth = false;
  std::vector<std::int64_t> dep_size{160, 120};
  double plane_z = 2.0, baseline = 0.2;
  auto* d_cmd = app.add_subcommand("depth", "multi-view depth of a reference image");
  d_cmd->add_option("views", views, "IMAGE CAMERA pairs; camera files hold 'fx fy cx cy' and a 4x4 world-to-camera matrix");
  d_cmd->add_option("--ref", ref, "index of the reference view (synthetic: 1, the middle camera)")->capture_default_str();
  d_cmd->add_flag("--synthetic", dep_synth, "use a rendered three-view textured plane instead of inputs");
  d_cmd->add_option("--size", dep_size, "synthetic width height")->expected(2)->capture_default_str();
  d_cmd->add_option("--plane-depth", plane_z, "synthetic plane depth")->capture_default_str();
  d_cmd->add_option("--baseline", baseline, "synthetic camera spacing")->capture_default_str();
  add_common(d_cmd, dep);

  Common att{attack_defaults(), "adam"};
  std::vector<std::string> att_inputs;
  std::string h_path;
  bool att_synth = false;
  AttackOptions opts;
  auto* a_cmd = app.add_subcommand("attack", "perturb two grayscale images so their features match under a target homography");
  a_cmd->add_option("images", att_inputs, "IMAGE_A IMAGE_B (grayscale PGM)");
  a_cmd->add_option("--homography", h_path, "target homography file, 3 rows of 3 numbers (A -> B)");
  a_cmd->add_flag("--synthetic", att_synth, "use two unrelated 128x128 textures and a fixed rigid target");
  a_cmd->add_option("--keypoints", opts.max_keypoints, "keypoints kept per image")->capture_default_str();
  a_cmd->add_option("--redetect", opts.redetect_every, "iterations between re-detections")->capture_default_str();
  add_common(a_cmd, att);

  std::string op = "sobel";
  std::vector<std::int64_t> batches{1, 2, 4, 8, 16};
  std::int64_t size = 256;
  int repeats = 10;
  fs::path bench_out;
  auto* b_cmd = app.add_subcommand("bench", "time a batched operator");
  b_cmd->add_option("--op", op, "sobel | gaussian | warp")->capture_default_str();
  b_cmd->add_option("--batches", batches, "batch sizes")->delimiter(',')->capture_default_str();
  b_cmd->add_option("--size", size, "square image side")->capture_default_str();
  b_cmd->add_option("--repeats", repeats, "timed runs per batch (>= 3)")->capture_default_str();
  b_cmd->add_option("--out", bench_out, "directory for bench.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    if (r_cmd->parsed()) return run_register(reg, src, dst);
    if (d_cmd->parsed()) return run_depth(dep, views, dep_synth && d_cmd->count("--ref") == 0 ? 1 : ref, dep_synth, dep_size, plane_z, baseline);
    if (a_cmd->parsed()) return run_attack(att, att_inputs, h_path, att_synth, opts);
    if (b_cmd->parsed()) return run_bench(op, batches, size, repeats, bench_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage;
  } catch (const EstimationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return failed;
  } catch (const OptimizationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return failed;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return bad_input;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return bad_input;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return internal;
  }
  return usage;
}
