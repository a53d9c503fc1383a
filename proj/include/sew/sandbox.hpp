#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace sew {

struct ProcessLimits {
    std::chrono::milliseconds wall_timeout{10000};
    std::size_t max_output_bytes = 1 << 20;
    /// Confine writes to the working directory (Landlock) and deny
    /// network sockets (seccomp + network namespace when permitted).
    bool isolate = true;
};

struct ProcessResult {
    int exit_code = -1;   // valid when !signaled
    int term_signal = 0;  // non-zero when killed by a signal
    bool timed_out = false;
    bool output_overflow = false;
    std::string stdout_data;
    std::string stderr_data;
    std::chrono::milliseconds wall{0};

    bool ok() const { return !timed_out && !output_overflow && term_signal == 0 && exit_code == 0; }
};

/// Runs `argv` in `workdir` with `stdin_data`, a clean environment and a
/// hard SIGKILL of the whole process group at the wall timeout. Throws
/// Error(SandboxSetup) when the process cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv, const std::string& stdin_data,
                          const std::filesystem::path& workdir, const ProcessLimits& limits);

/// Whether filesystem confinement is available on this kernel.
bool landlock_available();

/// Private scratch directory removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::filesystem::path& root = std::filesystem::temp_directory_path());
    ~ScratchDir();
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace sew
