// Reference bridge process for `--target bridge`.
//
//   roost_bridge_example echo              log density 0 everywhere
//   roost_bridge_example coinflip N Y      tempered coinflip posterior
//
// Protocol: read "hello <d>", answer "ok"; then answer each
// "logd <beta> <x1> ... <xd>" with one decimal or "-inf".

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr double kNegInf = -INFINITY;

/// Binomial(n, p1 p2) likelihood on [0,1]^2 with a flat prior. Written
/// independently of the library so the two can be cross-checked.
struct Coinflip {
  double n;
  double y;

  double log_target(double p1, double p2) const {
    if (p1 < 0 || p1 > 1 || p2 < 0 || p2 > 1) return kNegInf;
    const double q = p1 * p2;
    const double log_choose = std::lgamma(n + 1) - std::lgamma(y + 1) - std::lgamma(n - y + 1);
    double lp = log_choose;
    if (y > 0) lp = q > 0 ? lp + y * std::log(q) : kNegInf;
    if (lp == kNegInf) return lp;
    if (n - y > 0) lp = q < 1 ? lp + (n - y) * std::log1p(-q) : kNegInf;
    return lp;
  }

  double log_reference(double p1, double p2) const {
    return (p1 < 0 || p1 > 1 || p2 < 0 || p2 > 1) ? kNegInf : 0.0;
  }
};

void print(double v) {
  if (v == kNegInf) {
    std::cout << "-inf\n";
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g\n", v);
  std::cout << buf;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "echo";
  Coinflip coinflip{2, 1};
  if (mode == "coinflip") {
    if (argc != 4) {
      std::cerr << "usage: roost_bridge_example coinflip N Y\n";
      return 2;
    }
    coinflip = {std::stod(argv[2]), std::stod(argv[3])};
  } else if (mode != "echo") {
    std::cerr << "usage: roost_bridge_example [echo | coinflip N Y]\n";
    return 2;
  }

  std::string line;
  std::size_t dim = 0;
  while (std::getline(std::cin, line)) {
    std::istringstream in(line);
    std::string verb;
    in >> verb;
    if (verb == "hello") {
      in >> dim;
      if (mode == "coinflip" && dim != 2) {
        std::cerr << "coinflip is two-dimensional\n";
        return 1;
      }
      std::cout << "ok" << std::endl;
      continue;
    }
    if (verb != "logd") {
      std::cerr << "unknown request: " << line << '\n';
      return 1;
    }
    double beta = 0;
    in >> beta;
    std::vector<double> x;
    for (double v; in >> v;) x.push_back(v);
    if (x.size() != dim) {
      std::cerr << "expected " << dim << " coordinates, got " << x.size() << '\n';
      return 1;
    }
    if (mode == "echo") {
      std::cout << "0.0" << std::endl;
      continue;
    }
    const double ref = coinflip.log_reference(x[0], x[1]);
    const double tgt = coinflip.log_target(x[0], x[1]);
    double out;
    if (beta == 0.0)
      out = ref;
    else if (beta == 1.0)
      out = tgt;
    else if (ref == kNegInf || tgt == kNegInf)
      out = kNegInf;
    else
      out = ref + beta * (tgt - ref);
    print(out);
    std::cout.flush();
  }
  return 0;
}
