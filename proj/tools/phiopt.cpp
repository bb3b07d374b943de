#include <iostream>

int main() {
  std::cout << "phiopt: command-line interface under construction\n";
  return 0;
}
