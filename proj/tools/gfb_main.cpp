#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gfb/gfb.hpp"

namespace {

int run_matio_info(const std::filesystem::path& path) {
  const auto bytes = gfb::read_file(path);
  const auto m = gfb::decode_matrix(bytes);
  std::cout << "format = " << (gfb::detect_format(bytes) == gfb::MatrixFormat::binary ? "binary" : "text")
            << "\nrows = " << m.rows() << "\ncols = " << m.cols()
            << "\nfrobenius_norm = " << gfb::detail::format_double(gfb::norm(m))
            << "\nmax_abs = " << gfb::detail::format_double(gfb::max_abs(m)) << "\n";
  return gfb::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inexact relaxed generalized forward-backward solver with rate verification"};
  app.require_subcommand(1);

  std::filesystem::path solve_config;
  auto* solve = app.add_subcommand("solve", "Run a solve from a config file");
  solve->add_option("config", solve_config, "Experiment config (key = value)")->required()->check(CLI::ExistingFile);
  std::filesystem::path solve_out;
  auto* solve_out_opt = solve->add_option("--out", solve_out, "Output directory (overrides output_dir)");

  std::filesystem::path verify_trace, verify_config;
  auto* verify = app.add_subcommand("verify", "Check a solve's trace against the bound curves");
  verify->add_option("trace", verify_trace, "iterations.csv written by solve")->required()->check(CLI::ExistingFile);
  verify->add_option("config", verify_config, "The config used for the solve")->required()->check(CLI::ExistingFile);

  gfb::PcpCommand pcp;
  double mu1 = 0.0, mu2 = 0.0;
  auto* pcp_cmd = app.add_subcommand("pcp", "Synthesize and solve a low-rank + sparse decomposition");
  pcp_cmd->add_option("--rows", pcp.params.rows, "Rows of M")->capture_default_str();
  pcp_cmd->add_option("--cols", pcp.params.cols, "Columns of M")->capture_default_str();
  pcp_cmd->add_option("--rank", pcp.params.rank, "Rank of the low-rank part")->capture_default_str();
  pcp_cmd->add_option("--rho", pcp.params.rho, "Fraction of sparse entries")->capture_default_str();
  pcp_cmd->add_option("--sparse-min", pcp.params.sparse_min, "Smallest sparse magnitude")->capture_default_str();
  pcp_cmd->add_option("--sparse-max", pcp.params.sparse_max, "Largest sparse magnitude")->capture_default_str();
  pcp_cmd->add_option("--noise", pcp.params.noise_std, "Noise standard deviation")->capture_default_str();
  auto* mu1_opt = pcp_cmd->add_option("--mu1", mu1, "l1 weight (default 0.1 max|M|)");
  auto* mu2_opt = pcp_cmd->add_option("--mu2", mu2, "Nuclear-norm weight (default 0.5 |clip(M, mu1)|_2)");
  pcp_cmd->add_option("--seed", pcp.params.seed, "Generator seed")->capture_default_str();
  pcp_cmd->add_option("--iters", pcp.max_iters, "Iteration cap")->capture_default_str();
  pcp_cmd->add_option("--tol", pcp.stop_tol, "Stop when the squared fixed-point residual is below this")
      ->capture_default_str();
  pcp_cmd->add_option("--lambda", pcp.lambda, "Constant relaxation parameter")->capture_default_str();
  pcp_cmd->add_option("--out", pcp.output_dir, "Output directory")->capture_default_str();

  auto* matio = app.add_subcommand("matio", "Matrix file utilities");
  matio->require_subcommand(1);
  std::filesystem::path conv_in, conv_out;
  std::string conv_to = "binary";
  auto* convert = matio->add_subcommand("convert", "Convert between binary and text matrix files");
  convert->add_option("input", conv_in, "Input matrix file")->required()->check(CLI::ExistingFile);
  convert->add_option("output", conv_out, "Output matrix file")->required();
  convert->add_option("--to", conv_to, "Output format")->check(CLI::IsMember({"binary", "text"}))->capture_default_str();
  std::filesystem::path info_path;
  auto* info = matio->add_subcommand("info", "Print the shape and norms of a matrix file");
  info->add_option("path", info_path, "Matrix file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? gfb::kExitOk : gfb::kExitConfig;
  }

  if (*solve) {
    std::optional<std::filesystem::path> out_dir;
    if (*solve_out_opt) out_dir = solve_out;
    return gfb::cmd_solve(solve_config, std::cout, std::cerr, out_dir);
  }
  if (*verify) return gfb::cmd_verify(verify_trace, verify_config, std::cout, std::cerr);
  if (*pcp_cmd) {
    if (*mu1_opt) pcp.params.mu1 = mu1;
    if (*mu2_opt) pcp.params.mu2 = mu2;
    return gfb::cmd_pcp(pcp, std::cout, std::cerr);
  }
  try {
    if (*convert) {
      gfb::write_matrix(conv_out, gfb::read_matrix(conv_in),
                        conv_to == "text" ? gfb::MatrixFormat::text : gfb::MatrixFormat::binary);
      return gfb::kExitOk;
    }
    if (*info) return run_matio_info(info_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return gfb::kExitConfig;
  }
  return gfb::kExitOk;
}
