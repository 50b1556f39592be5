#include <iostream>

#include "goemo/error.hpp"

namespace goemo {

void log_info(const std::string& message) { std::cerr << "[info] " << message << '\n'; }

void log_warning(const std::string& message) { std::cerr << "[warn] " << message << '\n'; }

}  // namespace goemo
