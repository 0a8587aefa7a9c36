#include "mfi/external_predictor.hpp"

#include <cerrno>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "text.hpp"

namespace mfi {

std::string serialize_sample(const Sample &x) {
    if (const auto *seq = std::get_if<Sequence>(&x)) return *seq;
    std::string out;
    const auto px = std::get<Image>(x).pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (i) out += ',';
        out += text::format_double(px[i]);
    }
    return out;
}

struct ExternalPredictor::Process {
    pid_t pid = -1;
    int to_child = -1;
    int from_child = -1;
    std::string buffer;  // bytes read but not yet consumed
    bool broken = false;

    ~Process() { shutdown(); }

    void shutdown() {
        if (to_child >= 0) {
            // an empty line ends the session
            [[maybe_unused]] auto w = ::write(to_child, "\n", 1);
            ::close(to_child);
            to_child = -1;
        }
        if (from_child >= 0) {
            ::close(from_child);
            from_child = -1;
        }
        if (pid > 0) {
            int status = 0;
            for (int i = 0; i < 50; ++i) {
                if (::waitpid(pid, &status, WNOHANG) != 0) {
                    pid = -1;
                    return;
                }
                ::usleep(10000);
            }
            ::kill(pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            pid = -1;
        }
    }
};

namespace {

void set_cloexec(int fd) { ::fcntl(fd, F_SETFD, FD_CLOEXEC); }

}  // namespace

ExternalPredictor::ExternalPredictor(ExternalPredictorSpec spec) : spec_(std::move(spec)) {
    if (spec_.command.empty() || spec_.command.front().empty()) {
        throw Error(ErrorCode::invalid_argument, "external predictor command is empty");
    }
    if (!(spec_.timeout_seconds > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "external predictor timeout must be positive");
    }
    // a dead child must surface as an error on write, not kill us
    std::signal(SIGPIPE, SIG_IGN);

    int in_pipe[2];
    int out_pipe[2];
    int err_pipe[2];  // reports exec failure; closed by a successful exec
    if (::pipe(in_pipe) != 0) throw Error(ErrorCode::process_failure, std::strerror(errno));
    if (::pipe(out_pipe) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw Error(ErrorCode::process_failure, std::strerror(errno));
    }
    if (::pipe(err_pipe) != 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
        throw Error(ErrorCode::process_failure, std::strerror(errno));
    }
    set_cloexec(err_pipe[1]);

    std::vector<char *> argv;
    for (auto &arg : spec_.command) argv.push_back(arg.data());
    argv.push_back(nullptr);

    const pid_t pid = ::fork();
    if (pid < 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) ::close(fd);
        throw Error(ErrorCode::process_failure, std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0]}) ::close(fd);
        ::execvp(argv[0], argv.data());
        const int err = errno;
        [[maybe_unused]] auto w = ::write(err_pipe[1], &err, sizeof(err));
        ::_exit(127);
    }

    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    process_ = std::make_unique<Process>();
    process_->pid = pid;
    process_->to_child = in_pipe[1];
    process_->from_child = out_pipe[0];
    set_cloexec(process_->to_child);
    set_cloexec(process_->from_child);

    int exec_errno = 0;
    const auto got = ::read(err_pipe[0], &exec_errno, sizeof(exec_errno));
    ::close(err_pipe[0]);
    if (got == static_cast<ssize_t>(sizeof(exec_errno))) {
        process_.reset();
        throw Error(ErrorCode::process_failure,
                    "cannot execute '" + spec_.command.front() + "': " + std::strerror(exec_errno));
    }
}

ExternalPredictor::~ExternalPredictor() = default;

double ExternalPredictor::request(const Sample &x) const {
    using Serialization = ExternalPredictorSpec::Serialization;
    const bool is_sequence = std::holds_alternative<Sequence>(x);
    if (is_sequence != (spec_.serialization == Serialization::sequence_string)) {
        throw Error(ErrorCode::shape_mismatch, "sample kind does not match the predictor's serialization");
    }
    Process &p = *process_;
    if (p.broken) throw Error(ErrorCode::process_failure, "external predictor is no longer usable");

    std::string line = serialize_sample(x);
    line += '\n';
    std::size_t written = 0;
    while (written < line.size()) {
        const auto w = ::write(p.to_child, line.data() + written, line.size() - written);
        if (w < 0) {
            if (errno == EINTR) continue;
            p.broken = true;
            throw Error(ErrorCode::process_failure, std::string("write to predictor: ") + std::strerror(errno));
        }
        written += static_cast<std::size_t>(w);
    }

    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(spec_.timeout_seconds));
    std::size_t newline;
    while ((newline = p.buffer.find('\n')) == std::string::npos) {
        const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) {
            p.broken = true;
            throw Error(ErrorCode::timeout, "no response within " + text::format_double(spec_.timeout_seconds) + " s");
        }
        pollfd pfd{p.from_child, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
        if (ready < 0) {
            if (errno == EINTR) continue;
            p.broken = true;
            throw Error(ErrorCode::process_failure, std::string("poll: ") + std::strerror(errno));
        }
        if (ready == 0) continue;
        char chunk[4096];
        const auto got = ::read(p.from_child, chunk, sizeof(chunk));
        if (got < 0) {
            if (errno == EINTR) continue;
            p.broken = true;
            throw Error(ErrorCode::process_failure, std::string("read from predictor: ") + std::strerror(errno));
        }
        if (got == 0) {
            p.broken = true;
            throw Error(ErrorCode::process_failure, "predictor closed its output");
        }
        p.buffer.append(chunk, static_cast<std::size_t>(got));
    }

    const std::string response = p.buffer.substr(0, newline);
    p.buffer.erase(0, newline + 1);
    const auto value = text::parse_double(response);
    if (!value || !std::isfinite(*value)) {
        throw Error(ErrorCode::unparseable_response, "predictor replied '" + response + "'");
    }
    return *value;
}

double ExternalPredictor::score(const Sample &x) const {
    std::lock_guard lock(mutex_);
    return request(x);
}

std::vector<double> ExternalPredictor::score_batch(std::span<const Sample> xs) const {
    std::lock_guard lock(mutex_);
    std::vector<double> out;
    out.reserve(xs.size());
    for (const auto &x : xs) out.push_back(request(x));
    return out;
}

}  // namespace mfi
