#ifndef MSDE_LOGGING_HPP
#define MSDE_LOGGING_HPP

#include <memory>

#include <spdlog/spdlog.h>

namespace msde {

/// Shared stderr logger. Level comes from MSDE_LOG (error, warn, info, debug); default warn.
std::shared_ptr<spdlog::logger> logger();

}  // namespace msde

#endif  // MSDE_LOGGING_HPP
