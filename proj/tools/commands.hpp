#ifndef EAE_TOOLS_COMMANDS_HPP
#define EAE_TOOLS_COMMANDS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace eae::cli {

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kConfigError = 2, kNumericFailure = 3 };

struct CommonArgs {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output;
};

struct SampleArgs {
  CommonArgs common;
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> ensemble;
  std::filesystem::path queries;
  std::optional<long> rows;  // keep only the first rows of the query set
};

struct DiagnoseArgs {
  CommonArgs common;
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> ensemble;
  std::filesystem::path test;
};

struct DynamicsArgs {
  CommonArgs common;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> ensemble;
  std::filesystem::path test;
  bool oracle_latents = false;
};

struct VerifyArgs {
  CommonArgs common;
  bool invert_chain_force = false;
};

int cmd_train(const CommonArgs& args);
int cmd_sample(const SampleArgs& args);
int cmd_diagnose(const DiagnoseArgs& args);
int cmd_dynamics(const DynamicsArgs& args);
int cmd_verify(const VerifyArgs& args);

/// Prints the in-flight exception and maps it to an exit code.
int report_exception();

/// Runs `body`, turning library exceptions into the documented exit codes.
template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (...) {
    return report_exception();
  }
}

}  // namespace eae::cli

#endif  // EAE_TOOLS_COMMANDS_HPP
