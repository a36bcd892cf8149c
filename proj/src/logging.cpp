#include "msde/logging.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_sinks.h>

namespace msde {

namespace {
spdlog::level::level_enum level_from_env() {
    const char* env = std::getenv("MSDE_LOG");
    if (env == nullptr) return spdlog::level::warn;
    const std::string_view v(env);
    if (v == "error") return spdlog::level::err;
    if (v == "info") return spdlog::level::info;
    if (v == "debug") return spdlog::level::debug;
    return spdlog::level::warn;
}
}  // namespace

std::shared_ptr<spdlog::logger> logger() {
    static const std::shared_ptr<spdlog::logger> instance = [] {
        auto l = std::make_shared<spdlog::logger>("msde",
                                                  std::make_shared<spdlog::sinks::stderr_sink_mt>());
        l->set_pattern("[%l] %v");
        l->set_level(level_from_env());
        return l;
    }();
    return instance;
}

}  // namespace msde
