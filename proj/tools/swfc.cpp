#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "swfc/cli.hpp"

namespace {

int report(const swfc::RunResult& r) {
  if (r.exit_code != 0) {
    std::cerr << swfc::error_json(r) << "\n";
    return r.exit_code;
  }
  std::cout << r.summary;
  std::cout << "bundle: " << r.bundle.string() << "\n";
  std::cout << "checks: " << (r.checks_passed ? "passed" : "FAILED") << "\n";
  std::fprintf(stdout, "elapsed: %.2f s (map cache %d hit, %d miss)\n", r.seconds, r.cache.hits, r.cache.misses);
  return 0;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const swfc::Error& e) {
    swfc::RunResult r;
    r.exit_code = swfc::exit_code_for(e.code());
    r.error_code = swfc::to_string(e.code());
    r.message = e.what();
    std::cerr << swfc::error_json(r) << "\n";
    return r.exit_code;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "Internal"}, {"exit_code", 5}, {"message", e.what()}}.dump() << "\n";
    return 5;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-dimensional Seiberg-Witten Floer homotopy computations"};
  app.set_version_flag("--version", swfc::kVersion);
  app.require_subcommand(1);

  std::string manifest, provenance, gc_dir, output_override;
  int workers = 0;
  std::uintmax_t max_bytes = 0;

  auto* run = app.add_subcommand("run", "execute a run manifest");
  run->add_option("manifest", manifest, "manifest JSON file")->required();
  run->add_option("--workers", workers, "override worker_count")->check(CLI::PositiveNumber);
  run->add_option("--output-dir", output_override, "override output_dir");

  auto* rerun = app.add_subcommand("rerun", "re-execute the manifest stored in a bundle's provenance.json");
  rerun->add_option("provenance", provenance, "provenance.json of a bundle")->required();
  rerun->add_option("--workers", workers, "override worker_count")->check(CLI::PositiveNumber);
  rerun->add_option("--output-dir", output_override, "override output_dir");

  auto* gc = app.add_subcommand("gc", "evict least recently used cached maps");
  gc->add_option("output_dir", gc_dir, "output directory holding cache/")->required();
  gc->add_option("--max-bytes", max_bytes, "byte budget for cache/")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  auto apply = [&](swfc::RunManifest m) {
    if (workers > 0) m.worker_count = workers;
    if (!output_override.empty()) m.output_dir = output_override;
    return report(swfc::run(m));
  };
  if (*run) return guarded([&] { return apply(swfc::load_manifest(manifest)); });
  if (*rerun) return guarded([&] { return apply(swfc::manifest_from_provenance(provenance)); });
  return guarded([&] {
    auto r = swfc::cache_gc(gc_dir, max_bytes);
    nlohmann::json j{{"bytes_before", r.bytes_before},
                     {"bytes_after", r.bytes_after},
                     {"evicted", r.evicted},
                     {"kept", r.kept}};
    std::cout << j.dump(2) << "\n";
    return 0;
  });
}
