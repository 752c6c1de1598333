#include "groundhog/logging.h"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace groundhog {

void configure_logging() {
  auto logger = spdlog::get("groundhog");
  if (!logger) logger = spdlog::stderr_logger_mt("groundhog");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("GROUNDHOG_LOG");
  const std::string_view level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("GROUNDHOG_LOG='{}' not recognized; using info", level);
  }
}

}  // namespace groundhog
