// Writes a generated two-class corpus (PNG images + index.csv) for smoke runs.

#include <iostream>

#include "CLI11.hpp"
#include "agbada/data/synthetic.hpp"

int main(int argc, char** argv) {
  agbada::data::SyntheticCorpusSpec spec;
  std::string dir;
  CLI::App app{"Generate a synthetic two-class clothing corpus"};
  app.add_option("dir", dir, "output directory")->required();
  app.add_option("--count", spec.count)->capture_default_str();
  app.add_option("--female-fraction", spec.female_fraction)->capture_default_str();
  app.add_option("--size", spec.size)->capture_default_str();
  app.add_option("--seed", spec.seed)->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  try {
    const auto rows = agbada::data::write_synthetic_corpus(dir, spec);
    std::cout << "wrote " << rows.size() << " images to " << dir << "\n";
  } catch (const agbada::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
