#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cli.hpp"

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("thinkswitch"));
  if (const char* level = std::getenv("THINKSWITCH_LOG"); level && *level) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
  return thinkswitch::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
