#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include "fourthdown/common.hpp"

int main(int argc, char** argv) {
  fourthdown::set_log_level(fourthdown::LogLevel::error);
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
