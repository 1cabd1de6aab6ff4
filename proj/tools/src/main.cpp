#include "app.hpp"

int main(int argc, char** argv) {
  return fleetcm::cli::run(std::vector<std::string>(argv, argv + argc));
}
