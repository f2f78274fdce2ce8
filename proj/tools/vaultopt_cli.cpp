#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "vaultopt/cli_io.hpp"

int main(int argc, char** argv) {
    CLI::App app{"vaultopt: optimal vaults and grid-shells over planar domains"};
    std::string config_path;
    std::string mesh_path, report_path;
    std::string log_level = "info";
    double tol = -1.0, tol_v = -1.0;
    int max_iter = -1, threads = -1;

    app.add_option("--config", config_path, "JSON run configuration")->required();
    app.add_option("--tol", tol, "interior-point tolerance (overrides config)");
    app.add_option("--tol-v", tol_v, "member-adding violation tolerance (overrides config)");
    app.add_option("--max-iter", max_iter, "interior-point iteration cap (overrides config)");
    app.add_option("--threads", threads, "scan threads; 0 = hardware (overrides config)");
    app.add_option("--export-mesh", mesh_path, "write the recovered shell as OBJ + sidecar");
    app.add_option("--export-report", report_path, "write the run report as JSON");
    app.add_option("--log-level", log_level, "quiet | info | debug")
        ->check(CLI::IsMember({"quiet", "info", "debug"}));
    CLI11_PARSE(app, argc, argv);

    try {
        vaultopt::RunConfig cfg = vaultopt::load_config(config_path);
        if (tol > 0.0) cfg.tol = tol;
        if (tol_v > 0.0) cfg.tol_v = tol_v;
        if (max_iter > 0) cfg.max_iter = max_iter;
        if (threads >= 0) cfg.threads = threads; // VAULTOPT_THREADS still wins
        if (!mesh_path.empty()) cfg.mesh_path = mesh_path;
        if (!report_path.empty()) cfg.report_path = report_path;

        vaultopt::LogSink sink;
        if (log_level != "quiet")
            sink = [](const std::string& line) { std::cout << line << "\n" << std::flush; };

        const vaultopt::RunReport rep = vaultopt::run(cfg, sink);
        if (log_level == "quiet") std::cout << vaultopt::report_summary_line(rep) << "\n";
        return rep.verified ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
