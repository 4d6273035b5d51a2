// SPDX-License-Identifier: Apache-2.0

#include "capmine/service.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <functional>
#include <future>
#include <list>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "capmine/error.hpp"
#include "capmine/params.hpp"
#include "capmine/result_json.hpp"
#include "capmine/timefmt.hpp"
#include "capmine/upload.hpp"
#include "httplib.h"

namespace capmine {

using nlohmann::json;

namespace {

class WorkerPool {
  public:
    explicit WorkerPool(std::size_t n) {
        for (std::size_t i = 0; i < std::max<std::size_t>(1, n); ++i)
            threads_.emplace_back([this](std::stop_token st) { loop(st); });
    }
    ~WorkerPool() {
        for (auto& t : threads_) t.request_stop();
        cv_.notify_all();
        threads_.clear();
    }

    void submit(std::function<void()> task) {
        {
            std::lock_guard lock(mutex_);
            queue_.push_back(std::move(task));
        }
        cv_.notify_one();
    }

  private:
    void loop(std::stop_token st) {
        for (;;) {
            std::function<void()> task;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [&] { return st.stop_requested() || !queue_.empty(); });
                if (st.stop_requested()) return;
                task = std::move(queue_.front());
                queue_.pop_front();
            }
            task();
        }
    }

    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> queue_;
    std::vector<std::jthread> threads_;
};

// One mining run shared by every request for the same cache key.
struct Flight {
    std::shared_future<std::string> body;
    std::atomic<bool> started{false};
    std::atomic<std::size_t> done{0};
    std::atomic<std::size_t> total{0};
};

struct Job {
    std::string id;
    std::string result_key;
    std::shared_ptr<Flight> flight;
};

struct UploadEntry {
    std::mutex mutex;
    std::unique_ptr<UploadSession> session;
    std::string summary;  // set once committed
};

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingChunks:
        case ErrorCode::SessionClosed: return 409;
        case ErrorCode::PayloadTooLarge: return 413;
        case ErrorCode::NotFound: return 404;
        case ErrorCode::NegativeEpsilon:
        case ErrorCode::NegativeEta:
        case ErrorCode::InvalidParams:
        case ErrorCode::UnknownSensor:
        case ErrorCode::TooLarge: return 422;
        case ErrorCode::StorageFull: return 507;
        case ErrorCode::KeyMismatch:
        case ErrorCode::IoFailure: return 500;
        default: return 400;
    }
}

json error_json(const Error& e) {
    json j{{"error", std::string(code_name(e.code()))}, {"message", e.detail()}};
    j["file"] = e.file().empty() ? json(nullptr) : json(e.file());
    j["line"] = e.line() == 0 ? json(nullptr) : json(e.line());
    return j;
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e, json extra = json::object()) {
    json body = error_json(e);
    for (auto& [k, v] : extra.items()) body[k] = v;
    send_json(res, status_for(e.code()), body);
}

json summary_json(const DatasetSummary& s) {
    return {{"name", s.name},
            {"content_hash", s.content_hash},
            {"sensor_count", s.sensor_count},
            {"attribute_count", s.attribute_count},
            {"timestamp_count", s.timestamp_count}};
}

json missing_json(const std::vector<ChunkRef>& missing) {
    json arr = json::array();
    for (const auto& m : missing) arr.push_back({{"file", std::string(file_kind_name(m.file))}, {"seq", m.seq}});
    return arr;
}

std::optional<EpochSeconds> parse_time_param(const std::string& text) {
    EpochSeconds v = 0;
    const char* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, v);
    if (ec == std::errc() && p == end) return v;
    return parse_timestamp(text);
}

std::size_t parse_size(const char* text, std::size_t fallback) {
    if (text == nullptr) return fallback;
    std::size_t v = 0;
    const char* end = text + std::char_traits<char>::length(text);
    auto [p, ec] = std::from_chars(text, end, v);
    return (ec == std::errc() && p == end) ? v : fallback;
}

}  // namespace

ServiceConfig config_from_env(ServiceConfig base) {
    base.port = static_cast<int>(parse_size(std::getenv("CAPMINE_PORT"), static_cast<std::size_t>(base.port)));
    if (const char* v = std::getenv("CAPMINE_DATA_DIR")) base.data_dir = v;
    base.workers = parse_size(std::getenv("CAPMINE_WORKERS"), base.workers);
    base.async_threshold = parse_size(std::getenv("CAPMINE_ASYNC_THRESHOLD"), base.async_threshold);
    if (const char* v = std::getenv("CAPMINE_CORS_ORIGIN")) base.cors_origin = v;
    base.max_upload_bytes = parse_size(std::getenv("CAPMINE_MAX_UPLOAD_BYTES"), base.max_upload_bytes);
    if (const char* v = std::getenv("CAPMINE_STATIC_DIR")) base.static_dir = v;
    return base;
}

struct Service::Impl {
    explicit Impl(ServiceConfig c)
        : config(std::move(c)),
          store(config.data_dir, config.store),
          pool(config.workers != 0 ? config.workers : std::max(1u, std::thread::hardware_concurrency())) {
        routes();
    }

    ServiceConfig config;
    Store store;
    WorkerPool pool;
    httplib::Server server;

    std::mutex flights_mutex;
    std::unordered_map<std::string, std::shared_ptr<Flight>> flights;

    std::mutex jobs_mutex;
    std::map<std::string, Job> jobs;
    std::size_t next_job = 1;

    std::mutex uploads_mutex;
    std::map<std::string, std::shared_ptr<UploadEntry>> uploads;

    std::mutex datasets_mutex;
    std::list<std::pair<std::string, std::shared_ptr<const Dataset>>> datasets;  // most recent first

    std::shared_ptr<const Dataset> load_by_hash(const std::string& hash) {
        {
            std::lock_guard lock(datasets_mutex);
            for (auto it = datasets.begin(); it != datasets.end(); ++it) {
                if (it->first == hash) {
                    datasets.splice(datasets.begin(), datasets, it);
                    return datasets.front().second;
                }
            }
        }
        auto d = std::make_shared<const Dataset>(store.get_dataset_by_hash(hash));
        std::lock_guard lock(datasets_mutex);
        datasets.emplace_front(hash, d);
        while (datasets.size() > std::max<std::size_t>(1, config.dataset_cache)) datasets.pop_back();
        return d;
    }

    std::shared_ptr<const Dataset> load(const std::string& name) {
        const auto info = store.describe_dataset(name);
        if (!info) throw Error(ErrorCode::NotFound, "no dataset named '" + name + "'");
        return load_by_hash(info->content_hash);
    }

    std::shared_ptr<Flight> start_or_join(const CacheKey& key, std::shared_ptr<const Dataset> dataset,
                                          const MiningParams& params) {
        const std::string id = key.to_string();
        std::lock_guard lock(flights_mutex);
        if (auto it = flights.find(id); it != flights.end()) return it->second;

        auto flight = std::make_shared<Flight>();
        auto promise = std::make_shared<std::promise<std::string>>();
        flight->body = promise->get_future().share();
        flights.emplace(id, flight);

        pool.submit([this, flight, promise, key, id, dataset = std::move(dataset), params] {
            flight->started = true;
            try {
                MineOptions opt;
                opt.threads = config.mine_threads;
                opt.on_progress = [flight](std::size_t done, std::size_t total) {
                    flight->total = total;
                    flight->done = done;
                };
                MiningResult result = mine(*dataset, params, opt);
                store.put_cached(key, result);
                auto body = store.get_cached(key);
                promise->set_value(body ? *body : serialize_result(result));
            } catch (...) {
                promise->set_exception(std::current_exception());
            }
            std::lock_guard l(flights_mutex);
            flights.erase(id);
        });
        return flight;
    }

    json job_json(const Job& job) {
        const Flight& f = *job.flight;
        json j{{"id", job.id}, {"progress", {{"done", f.done.load()}, {"total", f.total.load()}}}};
        if (f.body.wait_for(std::chrono::seconds(0)) == std::future_status::ready) {
            try {
                f.body.get();
                j["state"] = "done";
                j["result_key"] = job.result_key;
            } catch (const Error& e) {
                j["state"] = "failed";
                j["error"] = error_json(e);
            } catch (const std::exception& e) {
                j["state"] = "failed";
                j["error"] = {{"error", "IoFailure"}, {"message", e.what()}};
            }
        } else {
            j["state"] = f.started ? "running" : "queued";
        }
        return j;
    }

    template <class F>
    static httplib::Server::Handler guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                send_error(res, e);
            } catch (const json::parse_error& e) {
                send_json(res, 400, {{"error", "MalformedJson"}, {"message", e.what()}, {"file", nullptr}, {"line", nullptr}});
            } catch (const json::exception& e) {
                send_error(res, Error(ErrorCode::InvalidParams, e.what()));
            } catch (const std::exception& e) {
                send_error(res, Error(ErrorCode::IoFailure, e.what()));
            }
        };
    }

    void routes();
    void mine_route(const httplib::Request& req, httplib::Response& res);
    void series_route(const httplib::Request& req, httplib::Response& res);
    void correlated_route(const httplib::Request& req, httplib::Response& res);
    void upload_routes();
};

void Service::Impl::upload_routes() {
    server.Post(R"(/datasets/([^/]+)/upload-session)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const std::string name = req.matches[1];
        std::map<FileKind, std::size_t> expected;
        if (!req.body.empty()) {
            const json body = json::parse(req.body);
            if (!body.is_object()) throw Error(ErrorCode::InvalidParams, "expected a JSON object");
            if (body.contains("chunks")) {
                if (!body["chunks"].is_object()) throw Error(ErrorCode::InvalidParams, "'chunks' must be an object");
                for (const auto& [k, v] : body["chunks"].items()) {
                    const auto kind = parse_file_kind(k);
                    if (!kind) throw Error(ErrorCode::InvalidParams, "unknown file '" + k + "'");
                    if (!v.is_number_unsigned()) throw Error(ErrorCode::InvalidParams, "chunk count must be a positive integer");
                    expected[*kind] = v.get<std::size_t>();
                }
            }
        }
        auto entry = std::make_shared<UploadEntry>();
        entry->session = std::make_unique<UploadSession>(
            name, expected, UploadSession::Limits{config.lines_per_chunk, config.max_upload_bytes});
        json exp = json::object();
        for (const auto& [k, n] : entry->session->expected()) exp[std::string(file_kind_name(k))] = n;
        {
            std::lock_guard lock(uploads_mutex);
            uploads[name] = entry;
        }
        send_json(res, 201, {{"dataset", name}, {"state", "open"}, {"expected", exp},
                             {"lines_per_chunk", config.lines_per_chunk}});
    }));

    auto find_entry = [this](const std::string& name) {
        std::lock_guard lock(uploads_mutex);
        auto it = uploads.find(name);
        if (it == uploads.end()) throw Error(ErrorCode::NotFound, "no upload session for '" + name + "'");
        return it->second;
    };

    server.Get(R"(/datasets/([^/]+)/upload-session)", guarded([find_entry](const httplib::Request& req, httplib::Response& res) {
        auto entry = find_entry(req.matches[1]);
        std::lock_guard lock(entry->mutex);
        json j{{"dataset", std::string(req.matches[1])}};
        if (!entry->session) {
            j["state"] = "committed";
            j["summary"] = json::parse(entry->summary);
        } else {
            const auto& s = *entry->session;
            json exp = json::object();
            for (const auto& [k, n] : s.expected()) exp[std::string(file_kind_name(k))] = n;
            j["state"] = std::string(session_state_name(s.state()));
            j["expected"] = exp;
            j["received"] = s.received_count();
            j["received_bytes"] = s.received_bytes();
            j["missing"] = missing_json(s.missing());
        }
        send_json(res, 200, j);
    }));

    server.Delete(R"(/datasets/([^/]+)/upload-session)", guarded([this, find_entry](const httplib::Request& req, httplib::Response& res) {
        const std::string name = req.matches[1];
        auto entry = find_entry(name);
        {
            std::lock_guard lock(entry->mutex);
            if (entry->session) entry->session->abort();
        }
        std::lock_guard lock(uploads_mutex);
        if (auto it = uploads.find(name); it != uploads.end() && it->second == entry) uploads.erase(it);
        send_json(res, 200, {{"dataset", name}, {"state", "aborted"}});
    }));

    server.Post(R"(/datasets/([^/]+)/upload-session/chunks/([^/]+)/([0-9]+))",
                guarded([find_entry](const httplib::Request& req, httplib::Response& res) {
                    auto entry = find_entry(req.matches[1]);
                    const std::string file = req.matches[2];
                    const auto kind = parse_file_kind(file);
                    if (!kind) throw Error(ErrorCode::ChunkOutOfRange, "unknown file '" + file + "'");
                    std::size_t seq = 0;
                    const std::string seq_text = req.matches[3];
                    auto [p, ec] = std::from_chars(seq_text.data(), seq_text.data() + seq_text.size(), seq);
                    if (ec != std::errc()) throw Error(ErrorCode::ChunkOutOfRange, "bad sequence number");
                    std::lock_guard lock(entry->mutex);
                    if (!entry->session) throw Error(ErrorCode::SessionClosed, "upload session already committed");
                    entry->session->add_chunk(*kind, seq, req.body);
                    send_json(res, 200, {{"file", std::string(file_kind_name(*kind))},
                                         {"seq", seq},
                                         {"bytes", req.body.size()},
                                         {"missing", missing_json(entry->session->missing())}});
                }));

    server.Post(R"(/datasets/([^/]+)/upload-session/commit)",
                guarded([this, find_entry](const httplib::Request& req, httplib::Response& res) {
                    auto entry = find_entry(req.matches[1]);
                    std::lock_guard lock(entry->mutex);
                    if (!entry->session) {
                        res.status = 200;
                        res.set_content(entry->summary, "application/json");
                        return;
                    }
                    Dataset d;
                    try {
                        d = entry->session->commit();
                    } catch (const Error& e) {
                        if (e.code() == ErrorCode::MissingChunks) {
                            send_error(res, e, {{"missing", missing_json(entry->session->missing())}});
                            return;
                        }
                        throw;
                    }
                    store.put_dataset(d.name, d);
                    entry->summary = summary_json(d.summary()).dump();
                    entry->session.reset();
                    res.status = 200;
                    res.set_content(entry->summary, "application/json");
                }));
}

void Service::Impl::mine_route(const httplib::Request& req, httplib::Response& res) {
    const std::string name = req.matches[1];
    json body = req.body.empty() ? json::object() : json::parse(req.body);
    if (!body.is_object()) throw Error(ErrorCode::InvalidParams, "expected a JSON object");
    bool async = false;
    if (body.contains("async")) {
        if (!body["async"].is_boolean()) throw Error(ErrorCode::InvalidParams, "'async' must be a boolean");
        async = body["async"].get<bool>();
        body.erase("async");
    }
    const json params_json = body.contains("params") ? body["params"] : body;
    const MiningParams params = params_from_json(params_json);
    validate_params(params);

    const auto info = store.describe_dataset(name);
    if (!info) throw Error(ErrorCode::NotFound, "no dataset named '" + name + "'");
    const CacheKey key = make_cache_key(info->content_hash, params);
    const std::string key_text = key.to_string();
    res.set_header("X-Result-Key", key_text);

    if (auto cached = store.get_cached(key)) {
        res.set_header("X-Cache", "hit");
        res.status = 200;
        res.set_content(*cached, "application/json");
        return;
    }

    auto dataset = load_by_hash(info->content_hash);
    validate_params(params, dataset.get());
    auto flight = start_or_join(key, dataset, params);

    if (async || (config.async_threshold != 0 && dataset->sensors.size() > config.async_threshold)) {
        Job job;
        {
            std::lock_guard lock(jobs_mutex);
            job = {"job-" + std::to_string(next_job++), key_text, flight};
            jobs.emplace(job.id, job);
        }
        res.set_header("X-Cache", "miss");
        res.set_header("Location", "/jobs/" + job.id);
        send_json(res, 202, job_json(job));
        return;
    }

    const std::string& result = flight->body.get();
    res.set_header("X-Cache", "miss");
    res.status = 200;
    res.set_content(result, "application/json");
}

void Service::Impl::series_route(const httplib::Request& req, httplib::Response& res) {
    auto d = load(req.matches[1]);
    const SensorKey sk{req.matches[2], req.matches[3]};
    const auto si = d->find(sk);
    if (!si) throw Error(ErrorCode::NotFound, "no sensor " + sk.id + "/" + sk.attribute);
    const TimeGrid& g = d->grid;

    auto time_param = [&](const char* key, EpochSeconds fallback) {
        if (!req.has_param(key)) return fallback;
        const auto v = parse_time_param(req.get_param_value(key));
        if (!v) throw Error(ErrorCode::BadTimestamp, std::string("bad '") + key + "' parameter");
        return *v;
    };
    const EpochSeconds last = g.count == 0 ? g.start : g.at(g.count - 1);
    const EpochSeconds from = time_param("from", g.start);
    const EpochSeconds to = time_param("to", last);
    if (g.count == 0 || from > to || to < g.start || from > last) {
        send_json(res, 416, {{"error", "EmptyWindow"}, {"message", "window contains no grid timestamps"},
                             {"file", nullptr}, {"line", nullptr}});
        return;
    }
    // Snap outward to grid timestamps.
    const std::size_t lo = from <= g.start ? 0 : static_cast<std::size_t>((from - g.start) / g.step);
    std::size_t hi = g.count - 1;
    if (to < last) hi = static_cast<std::size_t>((to - g.start + g.step - 1) / g.step);

    const auto& values = d->series[*si].values;
    json ts = json::array();
    json times = json::array();
    json vals = json::array();
    for (std::size_t k = lo; k <= hi; ++k) {
        ts.push_back(g.at(k));
        times.push_back(format_timestamp(g.at(k)));
        vals.push_back(is_null(values[k]) ? json(nullptr) : json(values[k]));
    }
    send_json(res, 200, {{"id", sk.id}, {"attribute", sk.attribute}, {"start_index", lo},
                         {"timestamps", ts}, {"times", times}, {"values", vals}});
}

void Service::Impl::correlated_route(const httplib::Request& req, httplib::Response& res) {
    auto d = load(req.matches[1]);
    const SensorKey sk{req.matches[2], req.matches[3]};
    if (!d->find(sk)) throw Error(ErrorCode::NotFound, "no sensor " + sk.id + "/" + sk.attribute);
    if (!req.has_param("result")) throw Error(ErrorCode::InvalidParams, "missing 'result' parameter");
    const std::string key_text = req.get_param_value("result");
    const auto key = CacheKey::parse(key_text);
    const auto body = key ? store.get_cached(*key) : std::nullopt;
    if (!body) throw Error(ErrorCode::NotFound, "no result " + key_text);
    const MiningResult result = result_from_json(json::parse(*body));

    std::set<SensorKey> partners;
    for (const Cap& cap : result.caps) {
        const bool contains = std::any_of(cap.members.begin(), cap.members.end(),
                                          [&](const CapMember& m) { return m.sensor == sk; });
        if (!contains) continue;
        for (const CapMember& m : cap.members)
            if (m.sensor != sk) partners.insert(m.sensor);
    }
    json arr = json::array();
    for (const auto& p : partners) arr.push_back({{"id", p.id}, {"attribute", p.attribute}});
    send_json(res, 200, {{"correlated", arr}});
}

void Service::Impl::routes() {
    if (config.max_upload_bytes != 0) server.set_payload_max_length(config.max_upload_bytes);
    server.set_default_headers({{"Access-Control-Allow-Origin", config.cors_origin},
                                {"Access-Control-Expose-Headers", "X-Cache, X-Result-Key, Location"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
        res.status = 204;
        res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
    });
    if (!config.static_dir.empty()) server.set_mount_point("/", config.static_dir.string());

    upload_routes();

    server.Get("/datasets", guarded([this](const httplib::Request&, httplib::Response& res) {
        json arr = json::array();
        for (const auto& d : store.list_datasets())
            arr.push_back({{"name", d.name}, {"content_hash", d.content_hash},
                           {"created_at", d.created_at}, {"sensor_count", d.sensor_count}});
        send_json(res, 200, arr);
    }));

    server.Get(R"(/datasets/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto d = load(req.matches[1]);
        json s = summary_json(d->summary());
        s["name"] = std::string(req.matches[1]);
        s["attributes"] = d->attributes;
        s["grid"] = {{"start", d->grid.start}, {"step", d->grid.step}, {"count", d->grid.count}};
        send_json(res, 200, s);
    }));

    server.Get(R"(/datasets/([^/]+)/sensors)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto d = load(req.matches[1]);
        json arr = json::array();
        for (const auto& s : d->sensors)
            arr.push_back({{"id", s.key.id}, {"attribute", s.key.attribute}, {"lat", s.lat}, {"lon", s.lon}});
        send_json(res, 200, arr);
    }));

    server.Get(R"(/datasets/([^/]+)/sensors/([^/]+)/([^/]+)/series)",
               guarded([this](const httplib::Request& req, httplib::Response& res) { series_route(req, res); }));
    server.Get(R"(/datasets/([^/]+)/sensors/([^/]+)/([^/]+)/correlated)",
               guarded([this](const httplib::Request& req, httplib::Response& res) { correlated_route(req, res); }));
    server.Post(R"(/datasets/([^/]+)/mine)",
                guarded([this](const httplib::Request& req, httplib::Response& res) { mine_route(req, res); }));

    server.Get(R"(/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(jobs_mutex);
        auto it = jobs.find(req.matches[1]);
        if (it == jobs.end()) throw Error(ErrorCode::NotFound, "no job " + std::string(req.matches[1]));
        send_json(res, 200, job_json(it->second));
    }));

    auto cached_result = [this](const std::string& key_text) {
        const auto key = CacheKey::parse(key_text);
        auto body = key ? store.get_cached(*key) : std::nullopt;
        if (!body) throw Error(ErrorCode::NotFound, "no result " + key_text);
        return std::make_pair(*key, std::move(*body));
    };

    server.Get(R"(/results/([^/]+))", guarded([cached_result](const httplib::Request& req, httplib::Response& res) {
        res.status = 200;
        res.set_content(cached_result(req.matches[1]).second, "application/json");
    }));

    server.Get(R"(/results/([^/]+)/geojson)",
               guarded([this, cached_result](const httplib::Request& req, httplib::Response& res) {
                   auto [key, body] = cached_result(req.matches[1]);
                   const MiningResult result = result_from_json(json::parse(body));
                   auto d = load_by_hash(key.dataset_hash);
                   res.status = 200;
                   res.set_content(result_to_geojson(result, *d).dump(), "application/geo+json");
               }));
}

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() {
    stop();
}

int Service::bind() {
    if (impl_->config.port == 0) {
        const int port = impl_->server.bind_to_any_port(impl_->config.host);
        if (port > 0) impl_->config.port = port;
        return port;
    }
    return impl_->server.bind_to_port(impl_->config.host, impl_->config.port) ? impl_->config.port : -1;
}

bool Service::listen() { return impl_->server.listen_after_bind(); }

bool Service::run() { return bind() > 0 && listen(); }

void Service::stop() {
    if (impl_) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

Store& Service::store() { return impl_->store; }

const ServiceConfig& Service::config() const { return impl_->config; }

}  // namespace capmine
