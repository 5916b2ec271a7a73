#pragma once

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cmath>
#include <charconv>
#include <chrono>
#include <cstring>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "wcsearch/error.hpp"
#include "wcsearch/format.hpp"
#include "wcsearch/hyperspace.hpp"

extern char** environ;

namespace wcsearch {

// Wire format, one exchange per simulation:
//   request: OC values in declaration order, then the corner label, single
//            spaces, '\n' terminated
//   reply:   one value per response in spec order, single spaces, or
//            "ERR <message>"
inline std::string format_wire_value(double v) {
    char buf[512];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
    if (ec != std::errc{}) throw ValidationError("value not representable on the wire");
    std::string s(buf, end);
    if (s == "-0") s = "0";
    return s;
}

inline std::string encode_request(const CircuitModel& model, const ConfigurationPoint& point) {
    model.validate(point);
    std::string line;
    for (std::size_t i = 0; i < point.oc_values.size(); ++i) {
        if (i) line += ' ';
        line += format_wire_value(point.oc_values[i]);
    }
    if (model.corner()) line += ' ' + model.corner_label(point);
    line += '\n';
    return line;
}

inline std::vector<double> decode_reply(std::string_view line, std::size_t responses) {
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line == "ERR") throw SimulatorErrorReply("");
    if (line.starts_with("ERR ")) throw SimulatorErrorReply(std::string(line.substr(4)));
    const auto fields = split(line, ' ');
    if (fields.size() != responses)
        throw MalformedReply("simulator reply has " + std::to_string(fields.size()) + " values, expected " +
                             std::to_string(responses) + ": '" + std::string(line) + "'");
    std::vector<double> out;
    out.reserve(responses);
    for (const auto& f : fields) {
        double v = 0.0;
        try {
            v = parse_double(f);
        } catch (const ParseError&) {
            throw MalformedReply("simulator reply field '" + f + "' is not a decimal number");
        }
        if (!std::isfinite(v)) throw MalformedReply("simulator reply field '" + f + "' is not finite");
        out.push_back(v);
    }
    return out;
}

// Child process speaking the line protocol on stdin/stdout. One request is
// outstanding at a time; concurrent callers are serialized.
class ExternalSimulator {
public:
    ExternalSimulator(CircuitModel model, std::vector<std::string> command,
                      std::chrono::milliseconds timeout = std::chrono::seconds(600))
        : model_(std::move(model)), timeout_(timeout) {
        if (command.empty()) throw ValidationError("external simulator command is empty");
        // A dead child must surface as a write error, not kill this process.
        static const bool sigpipe_ignored = [] { return std::signal(SIGPIPE, SIG_IGN) != SIG_ERR; }();
        (void)sigpipe_ignored;
        int to_child[2], from_child[2];
        if (::pipe(to_child) != 0) throw IoError(std::string("pipe: ") + std::strerror(errno));
        if (::pipe(from_child) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw IoError(std::string("pipe: ") + std::strerror(errno));
        }
        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
        posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
        for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]})
            posix_spawn_file_actions_addclose(&actions, fd);
        std::vector<char*> argv;
        for (auto& arg : command) argv.push_back(arg.data());
        argv.push_back(nullptr);
        const int rc = ::posix_spawnp(&pid_, argv[0], &actions, nullptr, argv.data(), environ);
        posix_spawn_file_actions_destroy(&actions);
        ::close(to_child[0]);
        ::close(from_child[1]);
        if (rc != 0) {
            ::close(to_child[1]);
            ::close(from_child[0]);
            throw IoError("cannot start simulator '" + command.front() + "': " + std::strerror(rc));
        }
        write_fd_ = to_child[1];
        read_fd_ = from_child[0];
    }

    ExternalSimulator(const ExternalSimulator&) = delete;
    ExternalSimulator& operator=(const ExternalSimulator&) = delete;

    ~ExternalSimulator() {
        if (write_fd_ >= 0) ::close(write_fd_);
        if (read_fd_ >= 0) ::close(read_fd_);
        if (pid_ > 0) {
            int status = 0;
            // Give the child a moment to exit on EOF before killing it.
            for (int i = 0; i < 20; ++i) {
                if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
                ::usleep(5000);
            }
            ::kill(pid_, SIGKILL);
            ::waitpid(pid_, &status, 0);
        }
    }

    const CircuitModel& model() const noexcept { return model_; }

    std::vector<double> simulate(const ConfigurationPoint& point) {
        const std::string request = encode_request(model_, point);
        std::lock_guard lock(mutex_);
        if (broken_) throw SimulatorFault("simulator channel is closed after an earlier fault");
        send(request);
        return decode_reply(receive(), model_.specs().size());
    }

private:
    void send(const std::string& data) {
        std::size_t done = 0;
        while (done < data.size()) {
            const ssize_t n = ::write(write_fd_, data.data() + done, data.size() - done);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) {
                broken_ = true;
                throw SimulatorFault(std::string("cannot write to simulator: ") + std::strerror(errno));
            }
            done += static_cast<std::size_t>(n);
        }
    }

    std::string receive() {
        const auto deadline = std::chrono::steady_clock::now() + timeout_;
        while (true) {
            const auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            const auto left =
                std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) {
                broken_ = true;
                throw SimulatorTimeout("simulator did not reply within " + std::to_string(timeout_.count()) + " ms");
            }
            pollfd pfd{read_fd_, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
            if (rc < 0 && errno == EINTR) continue;
            if (rc < 0) {
                broken_ = true;
                throw SimulatorFault(std::string("poll: ") + std::strerror(errno));
            }
            if (rc == 0) continue;
            char chunk[4096];
            const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) {
                broken_ = true;
                throw SimulatorFault("simulator closed its output before replying");
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    CircuitModel model_;
    std::chrono::milliseconds timeout_;
    pid_t pid_ = -1;
    int write_fd_ = -1;
    int read_fd_ = -1;
    bool broken_ = false;
    std::string buffer_;
    std::mutex mutex_;
};

}  // namespace wcsearch
