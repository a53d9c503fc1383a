#include "sew/sandbox.hpp"

#include <fcntl.h>
#include <linux/audit.h>
#include <linux/filter.h>
#include <linux/landlock.h>
#include <linux/seccomp.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <stddef.h>
#include <sys/prctl.h>
#include <sys/resource.h>
#include <sys/socket.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <iostream>
#include <mutex>

#include "sew/errors.hpp"

namespace sew {

namespace {

// Landlock ABI constants newer than the system header may carry.
constexpr std::uint64_t kFsRefer = 1ULL << 13;
constexpr std::uint64_t kFsTruncate = 1ULL << 14;
constexpr std::uint64_t kFsIoctlDev = 1ULL << 15;
constexpr std::uint64_t kNetBindTcp = 1ULL << 0;
constexpr std::uint64_t kNetConnectTcp = 1ULL << 1;

struct RulesetAttr {
    std::uint64_t handled_access_fs;
    std::uint64_t handled_access_net;
};

struct PathBeneathAttr {
    std::uint64_t allowed_access;
    std::int32_t parent_fd;
} __attribute__((packed));

int landlock_abi() {
    static const int abi = [] {
        const long v = syscall(SYS_landlock_create_ruleset, nullptr, 0, LANDLOCK_CREATE_RULESET_VERSION);
        return v < 0 ? 0 : static_cast<int>(v);
    }();
    return abi;
}

std::uint64_t write_rights(int abi) {
    std::uint64_t mask = LANDLOCK_ACCESS_FS_WRITE_FILE | LANDLOCK_ACCESS_FS_REMOVE_DIR |
                         LANDLOCK_ACCESS_FS_REMOVE_FILE | LANDLOCK_ACCESS_FS_MAKE_CHAR | LANDLOCK_ACCESS_FS_MAKE_DIR |
                         LANDLOCK_ACCESS_FS_MAKE_REG | LANDLOCK_ACCESS_FS_MAKE_SOCK | LANDLOCK_ACCESS_FS_MAKE_FIFO |
                         LANDLOCK_ACCESS_FS_MAKE_BLOCK | LANDLOCK_ACCESS_FS_MAKE_SYM;
    if (abi >= 2) mask |= kFsRefer;
    if (abi >= 3) mask |= kFsTruncate;
    if (abi >= 5) mask |= kFsIoctlDev;
    return mask;
}

#if defined(__x86_64__)
constexpr std::uint32_t kAuditArch = AUDIT_ARCH_X86_64;
#elif defined(__aarch64__)
constexpr std::uint32_t kAuditArch = AUDIT_ARCH_AARCH64;
#else
constexpr std::uint32_t kAuditArch = 0;
#endif

/// Everything the child needs, prepared before fork so the child only makes
/// async-signal-safe calls.
struct ChildPlan {
    std::vector<char*> argv;
    std::vector<char*> envp;
    const char* workdir;
    bool isolate;
    int abi;
    int stdin_fd, stdout_fd, stderr_fd, error_fd;
};

[[noreturn]] void child_fail(int error_fd, int stage) {
    const int payload[2] = {stage, errno};
    [[maybe_unused]] auto n = write(error_fd, payload, sizeof payload);
    _exit(127);
}

void install_landlock(const ChildPlan& plan) {
    if (plan.abi < 1) {
        return;
    }
    const std::uint64_t fs = write_rights(plan.abi);
    RulesetAttr attr{fs, plan.abi >= 4 ? (kNetBindTcp | kNetConnectTcp) : 0};
    const std::size_t attr_size = plan.abi >= 4 ? sizeof(RulesetAttr) : sizeof(std::uint64_t);
    const int ruleset = static_cast<int>(syscall(SYS_landlock_create_ruleset, &attr, attr_size, 0));
    if (ruleset < 0) {
        child_fail(plan.error_fd, 3);
    }
    auto allow = [&](const char* path, std::uint64_t rights) {
        const int fd = open(path, O_PATH | O_CLOEXEC);
        if (fd < 0) {
            return;
        }
        PathBeneathAttr rule{rights, fd};
        syscall(SYS_landlock_add_rule, ruleset, LANDLOCK_RULE_PATH_BENEATH, &rule, 0);
        close(fd);
    };
    allow(plan.workdir, fs);
    allow("/dev", LANDLOCK_ACCESS_FS_WRITE_FILE | (plan.abi >= 5 ? kFsIoctlDev : 0));
    if (syscall(SYS_landlock_restrict_self, ruleset, 0) != 0) {
        child_fail(plan.error_fd, 4);
    }
    close(ruleset);
}

void install_socket_filter(const ChildPlan& plan) {
    if (kAuditArch == 0) {
        return;
    }
    sock_filter filter[] = {
        BPF_STMT(BPF_LD | BPF_W | BPF_ABS, offsetof(seccomp_data, arch)),
        BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, kAuditArch, 1, 0),
        BPF_STMT(BPF_RET | BPF_K, SECCOMP_RET_ALLOW),
        BPF_STMT(BPF_LD | BPF_W | BPF_ABS, offsetof(seccomp_data, nr)),
        BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, __NR_socket, 0, 3),
        BPF_STMT(BPF_LD | BPF_W | BPF_ABS, offsetof(seccomp_data, args[0])),
        BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, AF_UNIX, 1, 0),
        BPF_STMT(BPF_RET | BPF_K, SECCOMP_RET_ERRNO | (EACCES & SECCOMP_RET_DATA)),
        BPF_STMT(BPF_RET | BPF_K, SECCOMP_RET_ALLOW),
    };
    sock_fprog prog{static_cast<unsigned short>(sizeof filter / sizeof filter[0]), filter};
    if (prctl(PR_SET_SECCOMP, SECCOMP_MODE_FILTER, &prog) != 0) {
        child_fail(plan.error_fd, 5);
    }
}

[[noreturn]] void run_child(const ChildPlan& plan) {
    setpgid(0, 0);
    signal(SIGPIPE, SIG_DFL);
    sigset_t none;
    sigemptyset(&none);
    sigprocmask(SIG_SETMASK, &none, nullptr);

    if (dup2(plan.stdin_fd, 0) < 0 || dup2(plan.stdout_fd, 1) < 0 || dup2(plan.stderr_fd, 2) < 0) {
        child_fail(plan.error_fd, 1);
    }
    if (chdir(plan.workdir) != 0) {
        child_fail(plan.error_fd, 2);
    }
    rlimit core{0, 0};
    setrlimit(RLIMIT_CORE, &core);

    if (plan.isolate) {
        unshare(CLONE_NEWNET);  // best effort; needs privileges
        if (prctl(PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0) {
            child_fail(plan.error_fd, 6);
        }
        install_landlock(plan);
        install_socket_filter(plan);
    }
    execvpe(plan.argv[0], plan.argv.data(), plan.envp.data());
    child_fail(plan.error_fd, 7);
}

void set_nonblocking(int fd) {
    fcntl(fd, F_SETFL, fcntl(fd, F_GETFL) | O_NONBLOCK);
}

struct Pipe {
    int read = -1;
    int write = -1;

    Pipe() {
        int fds[2];
        if (pipe2(fds, O_CLOEXEC) != 0) {
            throw Error(ErrorCode::SandboxSetup, std::string("pipe: ") + std::strerror(errno));
        }
        read = fds[0];
        write = fds[1];
    }
    ~Pipe() {
        close_read();
        close_write();
    }
    Pipe(const Pipe&) = delete;
    Pipe& operator=(const Pipe&) = delete;

    void close_read() {
        if (read >= 0) {
            close(read);
            read = -1;
        }
    }
    void close_write() {
        if (write >= 0) {
            close(write);
            write = -1;
        }
    }
};

std::once_flag g_sigpipe_once;
std::atomic<bool> g_landlock_warned{false};

}  // namespace

bool landlock_available() {
    return landlock_abi() >= 1;
}

ProcessResult run_process(const std::vector<std::string>& argv, const std::string& stdin_data,
                          const std::filesystem::path& workdir, const ProcessLimits& limits) {
    if (argv.empty()) {
        throw Error(ErrorCode::SandboxSetup, "empty command line");
    }
    std::call_once(g_sigpipe_once, [] { signal(SIGPIPE, SIG_IGN); });
    if (limits.isolate && !landlock_available() && !g_landlock_warned.exchange(true)) {
        std::cerr << "warning: Landlock is unavailable; candidate writes are not confined to the work directory\n";
    }

    std::vector<std::string> args = argv;
    const std::string home = "HOME=" + workdir.string();
    std::vector<std::string> env{"PATH=/usr/local/bin:/usr/bin:/bin", home, "LANG=C.UTF-8",
                                 "PYTHONDONTWRITEBYTECODE=1", "PYTHONHASHSEED=0", "PYTHONIOENCODING=utf-8"};
    const std::string workdir_str = workdir.string();

    Pipe in, out, err, status;
    ChildPlan plan;
    for (auto& a : args) plan.argv.push_back(a.data());
    plan.argv.push_back(nullptr);
    for (auto& e : env) plan.envp.push_back(e.data());
    plan.envp.push_back(nullptr);
    plan.workdir = workdir_str.c_str();
    plan.isolate = limits.isolate;
    plan.abi = landlock_abi();
    plan.stdin_fd = in.read;
    plan.stdout_fd = out.write;
    plan.stderr_fd = err.write;
    plan.error_fd = status.write;

    const auto start = std::chrono::steady_clock::now();
    const pid_t pid = fork();
    if (pid < 0) {
        throw Error(ErrorCode::SandboxSetup, std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        run_child(plan);
    }
    setpgid(pid, pid);
    in.close_read();
    out.close_write();
    err.close_write();
    status.close_write();

    // exec succeeded iff the status pipe closes without data.
    int payload[2] = {0, 0};
    ssize_t got;
    do {
        got = ::read(status.read, payload, sizeof payload);
    } while (got < 0 && errno == EINTR);
    if (got > 0) {
        int wstatus = 0;
        waitpid(pid, &wstatus, 0);
        throw Error(ErrorCode::SandboxSetup, "cannot start '" + argv[0] + "' (stage " + std::to_string(payload[0]) +
                                                 "): " + std::strerror(payload[1]));
    }

    ProcessResult result;
    set_nonblocking(in.write);
    set_nonblocking(out.read);
    set_nonblocking(err.read);
    std::size_t written = 0;
    if (stdin_data.empty()) {
        in.close_write();
    }
    const auto deadline = start + limits.wall_timeout;
    bool killed = false;
    char buf[65536];

    while (out.read >= 0 || err.read >= 0) {
        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) {
            result.timed_out = true;
            break;
        }
        pollfd fds[3];
        int nfds = 0;
        int idx_out = -1, idx_err = -1, idx_in = -1;
        if (out.read >= 0) { idx_out = nfds; fds[nfds++] = {out.read, POLLIN, 0}; }
        if (err.read >= 0) { idx_err = nfds; fds[nfds++] = {err.read, POLLIN, 0}; }
        if (in.write >= 0) { idx_in = nfds; fds[nfds++] = {in.write, POLLOUT, 0}; }
        const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        const int rc = poll(fds, static_cast<nfds_t>(nfds), static_cast<int>(std::max<long long>(remaining, 1)));
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (idx_in >= 0 && (fds[idx_in].revents & (POLLOUT | POLLERR | POLLHUP))) {
            const ssize_t n = ::write(in.write, stdin_data.data() + written, stdin_data.size() - written);
            if (n > 0) {
                written += static_cast<std::size_t>(n);
            }
            if ((n < 0 && errno != EAGAIN) || written >= stdin_data.size()) {
                in.close_write();
            }
        }
        auto drain = [&](int idx, Pipe& p, std::string& sink, bool counts) {
            if (idx < 0 || !(fds[idx].revents & (POLLIN | POLLHUP | POLLERR))) {
                return;
            }
            const ssize_t n = ::read(p.read, buf, sizeof buf);
            if (n > 0) {
                const std::size_t room = limits.max_output_bytes > sink.size() ? limits.max_output_bytes - sink.size() : 0;
                sink.append(buf, std::min<std::size_t>(room, static_cast<std::size_t>(n)));
                if (counts && static_cast<std::size_t>(n) > room) {
                    result.output_overflow = true;
                }
            } else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
                p.close_read();
            }
        };
        drain(idx_out, out, result.stdout_data, true);
        drain(idx_err, err, result.stderr_data, false);
        if (result.output_overflow) {
            break;
        }
    }

    if (result.timed_out || result.output_overflow) {
        killpg(pid, SIGKILL);
        killed = true;
    }
    int wstatus = 0;
    while (true) {
        const pid_t w = waitpid(pid, &wstatus, killed ? 0 : WNOHANG);
        if (w == pid) break;
        if (w < 0 && errno != EINTR) break;
        if (w == 0) {
            // Pipes closed but the process lingers: wait until the deadline.
            if (std::chrono::steady_clock::now() >= deadline) {
                result.timed_out = true;
                killpg(pid, SIGKILL);
                killed = true;
            } else {
                usleep(2000);
            }
        }
    }
    // Reap any stragglers left in the group.
    killpg(pid, SIGKILL);

    result.wall = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    if (WIFEXITED(wstatus)) {
        result.exit_code = WEXITSTATUS(wstatus);
    } else if (WIFSIGNALED(wstatus)) {
        result.term_signal = WTERMSIG(wstatus);
    }
    return result;
}

ScratchDir::ScratchDir(const std::filesystem::path& root) {
    std::string tmpl = (root / "sew-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) {
        throw Error(ErrorCode::SandboxSetup, "mkdtemp under " + root.string() + ": " + std::strerror(errno));
    }
    path_ = tmpl;
}

ScratchDir::~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

}  // namespace sew
