#include "vtank/api.hpp"

#include <httplib.h>

#include <charconv>
#include <typeinfo>

#include "vtank/digest.hpp"
#include "vtank/error.hpp"
#include "vtank/io.hpp"
#include "vtank/log.hpp"
#include "vtank/rangerun.hpp"

namespace vtank {
namespace fs = std::filesystem;

int http_status(Errc code) noexcept {
  switch (code) {
    case Errc::Validation:
    case Errc::MalformedFile:
    case Errc::UnsupportedFeature:
    case Errc::EmptyMesh:
    case Errc::InvalidMesh:
    case Errc::EmptyText:
    case Errc::UnknownCoordinate:
    case Errc::UnsupportedScheduler:
    case Errc::OutOfRange:
      return 400;
    case Errc::Unauthenticated:
      return 401;
    // Existence of records a caller may not touch is not revealed.
    case Errc::NotAuthorized:
    case Errc::NotFound:
    case Errc::UnknownSimulation:
      return 404;
    case Errc::DuplicateName:
    case Errc::Conflict:
    case Errc::GeometryNotValid:
    case Errc::IncompleteFamily:
      return 409;
    case Errc::Unreachable:
      return 503;
    default:
      return 500;
  }
}

namespace {

using httplib::Request;
using httplib::Response;

struct Ctx {
  const Request& req;
  Response& res;
  User user;
};

void send_json(Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

Json body_json(const Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    Json j = Json::parse(req.body);
    if (!j.is_object()) fail(Errc::Validation, "request body must be a JSON object");
    return j;
  } catch (const Json::exception& e) {
    fail(Errc::Validation, std::string("request body is not valid JSON: ") + e.what());
  }
}

std::string str_field(const Json& j, const char* key, bool required = true) {
  if (!j.contains(key) || j[key].is_null()) {
    if (required) fail(Errc::Validation, std::string(key) + ": required");
    return {};
  }
  if (!j[key].is_string()) fail(Errc::Validation, std::string(key) + ": must be a string");
  return j[key].get<std::string>();
}

std::string bearer(const Request& req) {
  const std::string h = req.get_header_value("Authorization");
  const std::string prefix = "Bearer ";
  return h.rfind(prefix, 0) == 0 ? h.substr(prefix.size()) : std::string();
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= s.size()) {
    size_t comma = s.find(',', start);
    if (comma == std::string::npos) comma = s.size();
    if (comma > start) out.push_back(s.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

std::size_t count_param(const Request& req, const char* name) {
  const std::string v = req.get_param_value(name);
  std::size_t n = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (v.empty() || ec != std::errc() || end != v.data() + v.size()) {
    fail(Errc::Validation, std::string(name) + ": must be a non-negative integer");
  }
  return n;
}

Json user_json(const User& u) {
  return {{"id", u.id},         {"login", u.login}, {"display_name", u.display_name},
          {"approved", u.approved}, {"admin", u.admin}, {"organization_ids", u.organization_ids}};
}

Json sim_json(const Catalogue& cat, const SimulationRecord& s) {
  Json j = s;
  j.erase("callback_token");
  j["status"] = to_string(s.status());
  if (s.range_header) {
    auto kids = family_children(cat, s.id);
    Json ids = Json::array();
    for (const auto& k : kids) ids.push_back(k.id);
    j["children"] = ids;
    j["family_status"] = to_string(family_status(kids));
  }
  return j;
}

Json sims_json(const Catalogue& cat, const std::vector<SimulationRecord>& v) {
  Json a = Json::array();
  for (const auto& s : v) a.push_back(sim_json(cat, s));
  return a;
}

template <class T>
Json array_of(const std::vector<T>& v) {
  Json a = Json::array();
  for (const auto& x : v) a.push_back(x);
  return a;
}

/// One file per internal error, with enough of the request to replay it.
std::string write_ticket(Platform& p, const ApiOptions& opt, const Request& req, const User& user,
                         const std::string& type, const std::string& code, const std::string& message) {
  const std::string ticket = "ticket-" + std::to_string(p.clock().now_ms()) + "-" + random_hex(4);
  Json doc = {{"id", ticket},
              {"time", p.clock().now_ms()},
              {"method", req.method},
              {"path", req.path},
              {"query", req.params},
              {"user_id", user.id},
              {"exception", type},
              {"code", code},
              {"message", message},
              {"request_body", req.body.substr(0, 2048)}};
  try {
    write_file(opt.tickets_dir / (ticket + ".json"), doc.dump(2) + "\n");
  } catch (const std::exception& w) {
    log_error("cannot write ticket " + ticket + ": " + w.what());
  }
  log_error(ticket + ": " + req.method + " " + req.path + ": " + message);
  return ticket;
}

void require_admin(const User& u) {
  if (!u.admin) fail(Errc::NotAuthorized, "administrator only");
}

}  // namespace

ApiServer::ApiServer(Platform& platform, ApiOptions options)
    : p_(platform), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  if (options_.tickets_dir.empty()) options_.tickets_dir = p_.config().data_dir / "tickets";
  routes();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) fail(Errc::Io, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

bool ApiServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

void ApiServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

void ApiServer::routes() {
  auto& srv = *server_;
  Platform& p = p_;
  Catalogue& cat = p.catalogue();
  const ApiOptions& opt = options_;

  // Every handler runs through here: authentication, idempotent replay,
  // error mapping and tickets.
  auto wrap = [&p, &opt](bool auth, std::function<void(Ctx&)> h) {
    return [&p, &opt, auth, h](const Request& req, Response& res) {
      std::string replay_key;
      User user;
      try {
        if (auth) user = p.authenticate(bearer(req));
        const std::string idem = req.get_header_value("Idempotency-Key");
        if (auth && req.method == "POST" && !idem.empty()) {
          replay_key = sha256_hex(user.id + "\n" + req.path + "\n" + idem);
          if (auto prior = p.store().get(RecordKind::Idempotency, replay_key)) {
            res.status = prior->at("status");
            res.set_content(prior->at("body").get<std::string>(), prior->at("content_type").get<std::string>());
            res.set_header("Idempotent-Replay", "true");
            return;
          }
        }
        Ctx ctx{req, res, user};
        h(ctx);
        if (!replay_key.empty() && res.status < 500) {
          p.store().put(RecordKind::Idempotency, replay_key,
                        Json{{"status", res.status},
                             {"body", res.body},
                             {"content_type", res.get_header_value("Content-Type")}});
        }
        return;
      } catch (const Error& e) {
        const int status = http_status(e.code());
        if (status != 500) {
          send_json(res, status, {{"error", {{"code", to_string(e.code())}, {"message", e.what()}}}});
          return;
        }
        const std::string ticket = write_ticket(p, opt, req, user, typeid(e).name(), to_string(e.code()), e.what());
        send_json(res, 500,
                  {{"error", {{"code", to_string(e.code())}, {"message", e.what()}, {"ticket", ticket}}}});
        return;
      } catch (const Json::exception& e) {
        // Wrong shapes inside otherwise valid JSON bodies.
        send_json(res, 400, {{"error", {{"code", "VALIDATION"}, {"message", e.what()}}}});
        return;
      } catch (const std::exception& e) {
        const std::string ticket = write_ticket(p, opt, req, user, typeid(e).name(), "INTERNAL", e.what());
        send_json(res, 500, {{"error", {{"code", "INTERNAL"}, {"message", e.what()}, {"ticket", ticket}}}});
      }
    };
  };

  // Sessions ---------------------------------------------------------------

  srv.Post("/auth/login", wrap(false, [&p](Ctx& c) {
             Json b = body_json(c.req);
             Session s = p.login(str_field(b, "login"), str_field(b, "password"));
             User u = p.catalogue().get_user(s.user_id);
             send_json(c.res, 200, {{"token", s.token}, {"expires_at", s.expires_at}, {"user", user_json(u)}});
           }));
  srv.Post("/auth/logout", wrap(true, [&p](Ctx& c) {
             p.logout(bearer(c.req));
             c.res.status = 204;
           }));
  srv.Get("/auth/me", wrap(true, [](Ctx& c) { send_json(c.res, 200, user_json(c.user)); }));

  // Geometries -------------------------------------------------------------

  srv.Post("/geometries", wrap(true, [&p](Ctx& c) {
             if (!c.req.is_multipart_form_data() || !c.req.has_file("file")) {
               fail(Errc::Validation, "file: expected a multipart upload with a 'file' part");
             }
             auto file = c.req.get_file_value("file");
             std::string name = c.req.has_file("name") ? c.req.get_file_value("name").content : "";
             if (name.empty()) name = fs::path(file.filename).stem().string();
             std::string org = c.req.has_file("org_id") ? c.req.get_file_value("org_id").content : "";
             if (org.empty() && c.user.organization_ids.size() == 1) org = *c.user.organization_ids.begin();
             if (org.empty()) fail(Errc::Validation, "org_id: required");
             auto g = p.upload_geometry(c.user, org, name, file.content, file.filename);
             send_json(c.res, 201, g);
           }));
  srv.Get("/geometries", wrap(true, [&cat](Ctx& c) { send_json(c.res, 200, array_of(cat.list_geometries(c.user))); }));
  srv.Get(R"(/geometries/([^/]+))",
          wrap(true, [&cat](Ctx& c) { send_json(c.res, 200, cat.get_geometry(c.user, c.req.matches[1])); }));
  srv.Get(R"(/geometries/([^/]+)/file)", wrap(true, [&cat](Ctx& c) {
            auto g = cat.get_geometry(c.user, c.req.matches[1]);
            c.res.set_content(cat.geometry_file(c.user, g.id), "application/octet-stream");
            c.res.set_header("Content-Disposition", "attachment; filename=\"" + g.file_name + "\"");
          }));
  srv.Get(R"(/geometries/([^/]+)/preview)", wrap(true, [&cat](Ctx& c) {
            auto g = cat.get_geometry(c.user, c.req.matches[1]);
            if (g.preview_ref.empty()) {
              fail(g.validation == GeometryValidation::Pending ? Errc::Conflict : Errc::NotFound,
                   "geometry " + g.id + " has no preview (" + to_string(g.validation) + ")");
            }
            c.res.set_content(cat.blobs().get(g.preview_ref), "model/stl");
          }));
  srv.Post(R"(/geometries/([^/]+)/help)", wrap(true, [&p](Ctx& c) {
             Json b = body_json(c.req);
             auto h = p.help_request(c.user, "GEOMETRY", c.req.matches[1], b.value("text", ""));
             send_json(c.res, 201, h);
           }));

  // Simulations ------------------------------------------------------------

  srv.Post("/simulations", wrap(true, [&cat](Ctx& c) {
             Json b = body_json(c.req);
             SimulationDraft d;
             d.name = str_field(b, "name");
             d.owner_org_id = str_field(b, "org_id", false);
             if (d.owner_org_id.empty() && c.user.organization_ids.size() == 1) {
               d.owner_org_id = *c.user.organization_ids.begin();
             }
             d.simsetup_id = str_field(b, "simsetup_id");
             d.machine_id = str_field(b, "machine_id");
             d.geometry_id = str_field(b, "geometry_id");
             d.visibility = visibility_from_string(b.value("visibility", "PRIVATE"));
             if (!b.contains("params")) fail(Errc::Validation, "params: required");
             d.params = b["params"].get<PhysicalParameters>();
             send_json(c.res, 201, sim_json(cat, cat.create_simulation(c.user, d)));
           }));
  srv.Get("/simulations",
          wrap(true, [&cat](Ctx& c) { send_json(c.res, 200, sims_json(cat, cat.list_simulations(c.user))); }));
  srv.Get(R"(/simulations/([^/]+))", wrap(true, [&cat, &opt](Ctx& c) {
            const std::string id = c.req.matches[1];
            if (opt.api_checks) {
              auto s = cat.find_simulation(id);
              if (!s || !cat.can_see(c.user, *s)) fail(Errc::NotFound, "simulation " + id + " not found");
            }
            send_json(c.res, 200, sim_json(cat, cat.get_simulation(c.user, id)));
          }));
  srv.Delete(R"(/simulations/([^/]+))", wrap(true, [&cat, &opt](Ctx& c) {
               const std::string id = c.req.matches[1];
               if (opt.api_checks) {
                 auto s = cat.find_simulation(id);
                 if (!s || !c.user.member_of(s->owner_org_id)) fail(Errc::NotFound, "simulation " + id + " not found");
               }
               send_json(c.res, 200, sim_json(cat, cat.soft_delete(c.user, id)));
             }));
  srv.Post(R"(/simulations/([^/]+)/submit)", wrap(true, [&p, &opt](Ctx& c) {
             const std::string id = c.req.matches[1];
             if (opt.api_checks) {
               auto s = p.catalogue().find_simulation(id);
               if (!s || !c.user.member_of(s->owner_org_id)) fail(Errc::NotFound, "simulation " + id + " not found");
             }
             send_json(c.res, 202, {{"task_id", p.orchestrator().request_submit(c.user, id)}, {"sim_id", id}});
           }));
  srv.Post(R"(/simulations/([^/]+)/range)", wrap(true, [&p, &cat](Ctx& c) {
             auto kids = p.submit_range(c.user, c.req.matches[1], range_spec_from_json(body_json(c.req)));
             send_json(c.res, 201, {{"parent_id", std::string(c.req.matches[1])}, {"children", sims_json(cat, kids)}});
           }));
  srv.Get(R"(/simulations/([^/]+)/family)", wrap(true, [&cat](Ctx& c) {
            const std::string y = c.req.has_param("y") ? c.req.get_param_value("y") : "total_drag";
            Json pts = Json::array();
            for (const auto& pt : family_series(cat, c.user, c.req.matches[1], y)) {
              pts.push_back({{"sim_id", pt.sim_id}, {"x", pt.x}, {"y", pt.y}});
            }
            send_json(c.res, 200, {{"y", y}, {"points", pts}});
          }));
  srv.Get(R"(/simulations/([^/]+)/results)", wrap(true, [&p](Ctx& c) {
            send_json(c.res, 200, {{"artifacts", p.result_artifacts(c.user, c.req.matches[1])}});
          }));
  srv.Get(R"(/simulations/([^/]+)/results/([^/]+))", wrap(true, [&p](Ctx& c) {
            auto a = p.result_artifact(c.user, c.req.matches[1], c.req.matches[2]);
            c.res.set_content(a.data, a.content_type);
          }));
  srv.Post(R"(/simulations/([^/]+)/help)", wrap(true, [&p](Ctx& c) {
             Json b = body_json(c.req);
             send_json(c.res, 201, p.help_request(c.user, "SIMULATION", c.req.matches[1], b.value("text", "")));
           }));

  // Job callbacks, authenticated by the simulation's own token.
  auto job_auth = [&p](const Request& req, const std::string& id) {
    if (!p.orchestrator().callback_token_ok(id, bearer(req))) {
      fail(Errc::Unauthenticated, "bad callback token for " + id);
    }
  };
  srv.Post(R"(/simulations/([^/]+)/status)", wrap(false, [&p, job_auth](Ctx& c) {
             const std::string id = c.req.matches[1];
             job_auth(c.req, id);
             Json b = body_json(c.req);
             if (!b.contains("step") || !b["step"].is_number_integer()) fail(Errc::Validation, "step: integer required");
             auto s = p.orchestrator().status_callback(id, b["step"].get<int>(), b.value("message", ""),
                                                       b.value("job_id", ""));
             send_json(c.res, 200, {{"id", s.id}, {"status", to_string(s.status())}, {"last_step", s.last_step()}});
           }));
  srv.Post(R"(/simulations/([^/]+)/notify)", wrap(false, [&p, job_auth](Ctx& c) {
             const std::string id = c.req.matches[1];
             job_auth(c.req, id);
             Json b = body_json(c.req);
             p.orchestrator().job_notification(id, str_field(b, "event"), b.value("message", ""));
             c.res.status = 204;
           }));

  // Administration ---------------------------------------------------------

  srv.Get("/organizations", wrap(true, [&cat](Ctx& c) { send_json(c.res, 200, array_of(cat.list_orgs(c.user))); }));
  srv.Post("/organizations", wrap(true, [&cat, &opt](Ctx& c) {
             if (opt.api_checks) require_admin(c.user);
             send_json(c.res, 201, cat.create_org(c.user, str_field(body_json(c.req), "name")));
           }));
  srv.Post(R"(/organizations/([^/]+)/grants)", wrap(true, [&cat, &opt](Ctx& c) {
             if (opt.api_checks) require_admin(c.user);
             Json b = body_json(c.req);
             const std::string org = c.req.matches[1];
             Organization o = cat.get_org(org);
             if (auto m = str_field(b, "machine_id", false); !m.empty()) o = cat.grant_machine(c.user, org, m);
             if (auto s = str_field(b, "simsetup_id", false); !s.empty()) o = cat.grant_simsetup(c.user, org, s);
             send_json(c.res, 200, o);
           }));
  srv.Post(R"(/organizations/([^/]+)/members)", wrap(true, [&cat, &opt](Ctx& c) {
             if (opt.api_checks) require_admin(c.user);
             User u = cat.add_member(c.user, str_field(body_json(c.req), "user_id"), c.req.matches[1]);
             send_json(c.res, 200, user_json(u));
           }));
  srv.Get("/users", wrap(true, [&cat, &opt](Ctx& c) {
            if (opt.api_checks) require_admin(c.user);
            Json a = Json::array();
            for (const auto& u : cat.list_users(c.user)) a.push_back(user_json(u));
            send_json(c.res, 200, a);
          }));
  srv.Post(R"(/users/([^/]+)/approve)", wrap(true, [&cat, &opt](Ctx& c) {
             if (opt.api_checks) require_admin(c.user);
             send_json(c.res, 200, user_json(cat.approve_user(c.user, c.req.matches[1])));
           }));

  // Non-admins see what their organizations are granted.
  auto granted = [&cat](const User& u, bool machines) {
    std::set<std::string> ids;
    for (const auto& o : cat.list_orgs(u)) {
      const auto& src = machines ? o.authorized_machine_ids : o.authorized_simsetup_ids;
      ids.insert(src.begin(), src.end());
    }
    return ids;
  };
  srv.Get("/machines", wrap(true, [&cat, granted](Ctx& c) {
            auto all = cat.list_machines();
            if (!c.user.admin) {
              auto ids = granted(c.user, true);
              std::erase_if(all, [&](const MachineConfig& m) { return !ids.count(m.id); });
            }
            send_json(c.res, 200, array_of(all));
          }));
  srv.Post("/machines", wrap(true, [&cat, &opt](Ctx& c) {
             if (opt.api_checks) require_admin(c.user);
             Json b = body_json(c.req);
             b["enabled"] = b.value("enabled", false);
             send_json(c.res, 201, cat.add_machine(c.user, b.get<MachineConfig>()));
           }));
  srv.Post(R"(/machines/([^/]+)/(enable|disable))", wrap(true, [&cat, &opt](Ctx& c) {
             if (opt.api_checks) require_admin(c.user);
             send_json(c.res, 200, cat.set_machine_enabled(c.user, c.req.matches[1], c.req.matches[2] == "enable"));
           }));
  srv.Get("/simsetups", wrap(true, [&cat, granted](Ctx& c) {
            auto all = cat.list_simsetups();
            if (!c.user.admin) {
              auto ids = granted(c.user, false);
              std::erase_if(all, [&](const SimSetupConfig& s) { return !ids.count(s.id); });
            }
            send_json(c.res, 200, array_of(all));
          }));
  srv.Post("/simsetups", wrap(true, [&p, &cat, &opt](Ctx& c) {
             if (opt.api_checks) require_admin(c.user);
             Json b = body_json(c.req);
             auto s = cat.add_simsetup(c.user, b.get<SimSetupConfig>());
             if (b.value("install_reference", false)) p.install_reference_plugin(s);
             send_json(c.res, 201, s);
           }));

  // Search -----------------------------------------------------------------

  srv.Get("/search/simulations", wrap(true, [&p, &cat](Ctx& c) {
            DashboardQuery q;
            if (c.req.has_param("name")) q.name_substring = c.req.get_param_value("name");
            if (c.req.has_param("status")) {
              std::set<SimStatus> st;
              for (const auto& s : split_csv(c.req.get_param_value("status"))) st.insert(sim_status_from_string(s));
              q.statuses = st;
            }
            if (c.req.has_param("org_id")) q.org_id = c.req.get_param_value("org_id");
            if (c.req.has_param("limit")) q.limit = count_param(c.req, "limit");
            if (c.req.has_param("offset")) q.offset = count_param(c.req, "offset");
            send_json(c.res, 200, sims_json(cat, p.search().filter(c.user, q)));
          }));

  // Without an explicit id list, every visible live simulation.
  auto candidate_ids = [&cat](const User& u, const std::vector<std::string>& given) {
    if (!given.empty()) return given;
    std::vector<std::string> ids;
    for (const auto& s : cat.list_simulations(u)) {
      if (!s.deleted) ids.push_back(s.id);
    }
    return ids;
  };
  srv.Post("/search/brush", wrap(true, [&p, candidate_ids](Ctx& c) {
             Json b = body_json(c.req);
             BrushSpec spec;
             const Json intervals = b.value("intervals", Json::object());
             if (!intervals.is_object()) fail(Errc::Validation, "intervals: expected an object");
             for (const auto& [coord, iv] : intervals.items()) {
               if (!iv.is_array() || iv.size() != 2) fail(Errc::Validation, "intervals." + coord + ": expected [lo, hi]");
               spec.intervals[coord] = {iv[0].get<double>(), iv[1].get<double>()};
             }
             auto ids = candidate_ids(c.user, b.value("sim_ids", std::vector<std::string>{}));
             send_json(c.res, 200, {{"sim_ids", p.search().brush(c.user, ids, spec)}});
           }));
  srv.Get("/search/compare", wrap(true, [&p, candidate_ids](Ctx& c) {
            if (!c.req.has_param("x") || !c.req.has_param("y")) fail(Errc::Validation, "x and y: required");
            std::vector<std::string> given;
            if (c.req.has_param("ids")) given = split_csv(c.req.get_param_value("ids"));
            Json pts = Json::array();
            for (const auto& pt : p.search().compare_series(c.user, candidate_ids(c.user, given),
                                                            c.req.get_param_value("x"), c.req.get_param_value("y"))) {
              pts.push_back({{"sim_id", pt.sim_id}, {"x", pt.x}, {"y", pt.y}});
            }
            send_json(c.res, 200, {{"points", pts}});
          }));

  // Monitoring -------------------------------------------------------------

  srv.Get("/monitor/health", wrap(true, [&p](Ctx& c) { send_json(c.res, 200, p.health()); }));
  srv.Get("/monitor/consistency", wrap(true, [&p](Ctx& c) {
            require_admin(c.user);
            Json a = Json::array();
            for (const auto& an : p.consistency_check()) {
              a.push_back({{"kind", an.kind}, {"record_id", an.record_id}, {"message", an.message}});
            }
            send_json(c.res, 200, {{"anomalies", a}});
          }));

  srv.set_error_handler([](const Request&, Response& res) {
    if (res.body.empty()) {
      send_json(res, res.status, {{"error", {{"code", res.status == 404 ? "NOT_FOUND" : "HTTP_ERROR"},
                                             {"message", "no such endpoint"}}}});
    }
  });
}

}  // namespace vtank
