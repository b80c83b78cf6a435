#include "dvhsmooth/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "dvhsmooth/csv.hpp"
#include "dvhsmooth/error.hpp"

namespace dvhsmooth {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

std::string_view to_string(Side side) noexcept {
    return side == Side::Left ? "left" : "right";
}

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid-argument";
        case ErrorCode::DegenerateCriticalPoint: return "degenerate-critical-point";
        case ErrorCode::TrackingLost: return "tracking-lost";
        case ErrorCode::BracketInvalid: return "bracket-invalid";
        case ErrorCode::FitFailed: return "fit-failed";
        case ErrorCode::IllConditionedStep: return "ill-conditioned-step";
        case ErrorCode::NumericalDomain: return "numerical-domain";
        case ErrorCode::InsufficientData: return "insufficient-data";
        case ErrorCode::Config: return "config";
        case ErrorCode::Io: return "io";
    }
    return "unknown";
}

int worker_threads() {
    if (const char* env = std::getenv("DVHSMOOTH_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n > 0) return static_cast<int>(std::min(n, 256L));
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, const std::function<void(int)>& body) {
    const int threads = std::min(worker_threads(), n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads - 1));
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace dvhsmooth
