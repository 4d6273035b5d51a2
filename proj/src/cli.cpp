// SPDX-License-Identifier: Apache-2.0

#include "capmine/cli.hpp"

#include <pthread.h>

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "capmine/error.hpp"
#include "capmine/generate.hpp"
#include "capmine/ingest.hpp"
#include "capmine/miner.hpp"
#include "capmine/params.hpp"
#include "capmine/result_json.hpp"
#include "capmine/service.hpp"
#include "capmine/store.hpp"

namespace capmine {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string(), path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string(), path.string());
}

struct MineFlags {
    std::string data, location, attribute;
    std::vector<std::string> epsilon;
    std::vector<std::string> max_error;
    double eta = 0.0;
    int mu = 0;
    int psi = 0;
    bool unsigned_mode = false;
    bool maximal = false;
    bool allow_repeated = false;
    std::string out;
    std::string geojson;
    std::string name = "dataset";
    std::size_t threads = 0;
};

MiningParams mine_params(const MineFlags& f) {
    MiningParams p;
    p.epsilon = parse_epsilon_syntax(f.epsilon);
    if (!f.max_error.empty()) {
        p.max_error = parse_threshold_syntax(f.max_error);
        if (!p.max_error.fallback) p.max_error.fallback = 0.0;
    }
    p.eta_meters = f.eta;
    p.mu = f.mu;
    p.psi = f.psi;
    p.distinct_attributes = !f.allow_repeated;
    p.direction = f.unsigned_mode ? DirectionMode::unsigned_mode : DirectionMode::signed_mode;
    p.maximal = f.maximal;
    validate_params(p);
    return p;
}

int cmd_mine(const MineFlags& f, const MiningParams& p, std::ostream& out, std::ostream& err) {
    const std::string attr = read_file(f.attribute);
    const std::string loc = read_file(f.location);
    const std::vector<std::string> data{read_file(f.data)};
    const Dataset ds = assemble_dataset(f.name, attr, loc, data);

    MineOptions opt;
    opt.threads = f.threads;
    const MiningResult result = mine(ds, p, opt);
    const std::string body = serialize_result(result);
    if (f.out.empty() || f.out == "-") {
        out << body << '\n';
    } else {
        write_file(f.out, body);
    }
    if (!f.geojson.empty()) write_file(f.geojson, result_to_geojson(result, ds).dump());
    err << result.caps.size() << " caps in " << std::fixed << std::setprecision(3) << result.elapsed_seconds
        << " s\n";
    return kExitOk;
}

int cmd_generate(const GenerateOptions& o, const std::string& dir, std::ostream& err) {
    const GeneratedDataset g = generate_dataset(o);
    const fs::path root(dir);
    write_file(root / "attribute.csv", g.files.attribute_csv);
    write_file(root / "location.csv", g.files.location_csv);
    write_file(root / "data.csv", g.files.data_csv);
    write_file(root / "manifest.json", g.manifest.dump(2) + "\n");
    err << "wrote " << g.dataset.sensors.size() << " sensors x " << g.dataset.grid.count << " timestamps to "
        << root.string() << '\n';
    return kExitOk;
}

int cmd_serve(ServiceConfig config, std::ostream& err) {
    // Signals go to a dedicated thread so shutdown can call into the server.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    Service service(std::move(config));
    const int port = service.bind();
    if (port <= 0) {
        err << "cannot bind " << service.config().host << ':' << service.config().port << '\n';
        return kExitDataError;
    }
    err << "listening on " << service.config().host << ':' << port << '\n';
    std::jthread waiter([&service, set] {
        int sig = 0;
        sigwait(&set, &sig);
        service.stop();
    });
    service.listen();
    if (waiter.joinable()) {
        pthread_kill(waiter.native_handle(), SIGTERM);
    }
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Correlated attribute pattern mining over sensor data", "capmine"};
    app.require_subcommand(1);

    MineFlags mf;
    auto* mine_cmd = app.add_subcommand("mine", "Mine caps from data.csv, location.csv and attribute.csv");
    mine_cmd->add_option("--data", mf.data, "data.csv path")->required();
    mine_cmd->add_option("--location", mf.location, "location.csv path")->required();
    mine_cmd->add_option("--attribute", mf.attribute, "attribute.csv path")->required();
    mine_cmd->add_option("--epsilon", mf.epsilon, "attr=value (repeatable), a number, or rel:fraction")
        ->required()
        ->delimiter(',');
    mine_cmd->add_option("--eta", mf.eta, "distance threshold in meters")->required();
    mine_cmd->add_option("--mu", mf.mu, "maximum number of attributes")->required();
    mine_cmd->add_option("--psi", mf.psi, "minimum support")->required();
    mine_cmd->add_option("--max-error", mf.max_error, "segmentation tolerance: attr=value or a number")
        ->delimiter(',');
    mine_cmd->add_flag("--unsigned", mf.unsigned_mode, "ignore the direction of changes");
    mine_cmd->add_flag("--maximal", mf.maximal, "drop caps contained in a larger cap");
    mine_cmd->add_flag("--allow-repeated-attributes", mf.allow_repeated, "let a cap hold one attribute twice");
    mine_cmd->add_option("--out", mf.out, "result JSON path (default stdout)");
    mine_cmd->add_option("--geojson", mf.geojson, "GeoJSON output path");
    mine_cmd->add_option("--name", mf.name, "dataset name recorded in diagnostics");
    mine_cmd->add_option("--threads", mf.threads, "worker threads, 0 = all cores");

    GenerateOptions go;
    std::string gen_dir = ".";
    auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic dataset with planted caps");
    gen_cmd->add_option("--sensors", go.sensors)->required();
    gen_cmd->add_option("--attributes", go.attributes)->required();
    gen_cmd->add_option("--timestamps", go.timestamps)->required();
    gen_cmd->add_option("--planted-caps", go.planted_caps)->required();
    gen_cmd->add_option("--noise", go.noise, "background jump probability")->required();
    gen_cmd->add_option("--seed", go.seed)->required();
    gen_cmd->add_option("--cap-size", go.cap_size);
    gen_cmd->add_option("--support", go.support, "planted timestamps per cap");
    gen_cmd->add_option("--nulls", go.null_fraction, "fraction of empty cells");
    gen_cmd->add_option("--out-dir", gen_dir);

    ServiceConfig sc = config_from_env();
    std::string data_dir = sc.data_dir.string();
    std::string static_dir = sc.static_dir.string();
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("--port", sc.port);
    serve_cmd->add_option("--host", sc.host);
    serve_cmd->add_option("--data-dir", data_dir);
    serve_cmd->add_option("--workers", sc.workers);
    serve_cmd->add_option("--async-threshold", sc.async_threshold, "sensor count above which mining is a job");
    serve_cmd->add_option("--cors-origin", sc.cors_origin);
    serve_cmd->add_option("--max-upload-bytes", sc.max_upload_bytes);
    serve_cmd->add_option("--static-dir", static_dir);

    std::string store_dir;
    std::string transfer_dir;
    auto* export_cmd = app.add_subcommand("export", "Copy a store's datasets and results to a directory");
    export_cmd->add_option("--data-dir", store_dir)->required();
    export_cmd->add_option("--to", transfer_dir)->required();
    auto* import_cmd = app.add_subcommand("import", "Load an exported directory into a store");
    import_cmd->add_option("--data-dir", store_dir)->required();
    import_cmd->add_option("--from", transfer_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n\n";
        const CLI::App* shown = &app;
        for (auto* sub : app.get_subcommands()) shown = sub;
        err << shown->help();
        return kExitUsage;
    }

    MiningParams params;
    if (*mine_cmd) {
        try {
            params = mine_params(mf);
        } catch (const Error& e) {
            err << e.what() << "\n\n" << mine_cmd->help();
            return kExitUsage;
        }
    }

    try {
        if (*mine_cmd) return cmd_mine(mf, params, out, err);
        if (*gen_cmd) return cmd_generate(go, gen_dir, err);
        if (*serve_cmd) {
            sc.data_dir = data_dir;
            sc.static_dir = static_dir;
            return cmd_serve(std::move(sc), err);
        }
        if (*export_cmd) {
            Store(store_dir).export_to(transfer_dir);
            return kExitOk;
        }
        if (*import_cmd) {
            Store(store_dir).import_from(transfer_dir);
            return kExitOk;
        }
    } catch (const Error& e) {
        err << e.what() << '\n';
        return kExitDataError;
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return kExitDataError;
    }
    return kExitUsage;
}

}  // namespace capmine
