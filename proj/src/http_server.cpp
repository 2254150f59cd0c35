#include "voiceloop/http_server.hpp"

#include <httplib.h>

#include "voiceloop/error.hpp"

namespace voiceloop {

namespace {

void send_json(httplib::Response& res, const Json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, {{"code", std::string(to_string(code))}, {"message", message}}, http_status(code));
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, ErrorCode::InvalidArgument, e.what());
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(Json{{"code", "Internal"}, {"message", e.what()}}.dump(), "application/json");
    }
  };
}

Json body_json(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  return parse_json(req.body);
}

}  // namespace

void install_routes(httplib::Server& server, VoiceService& service) {
  server.Post("/sessions", guarded([&](const httplib::Request& req, httplib::Response& res) {
                send_json(res, service.create_session(body_json(req)), 201);
              }));
  server.Get(R"(/sessions/([A-Za-z0-9]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
               send_json(res, service.get_session(req.matches[1]));
             }));
  server.Post(R"(/sessions/([A-Za-z0-9]+)/choice)", guarded([&](const httplib::Request& req, httplib::Response& res) {
                const Json body = body_json(req);
                require(body.contains("candidate_id") && body["candidate_id"].is_string(), ErrorCode::InvalidArgument,
                        "body needs a string candidate_id");
                send_json(res, service.post_choice(req.matches[1], body["candidate_id"].get<std::string>()));
              }));
  server.Post(R"(/sessions/([A-Za-z0-9]+)/satisfy)", guarded([&](const httplib::Request& req, httplib::Response& res) {
                send_json(res, service.satisfy(req.matches[1]));
              }));
  server.Get(R"(/sessions/([A-Za-z0-9]+)/trajectory)", guarded([&](const httplib::Request& req, httplib::Response& res) {
               send_json(res, service.get_trajectory(req.matches[1]));
             }));
  server.Get(R"(/sessions/([A-Za-z0-9]+)/media/([A-Za-z0-9]+\.[a-z0-9]+))",
             guarded([&](const httplib::Request& req, httplib::Response& res) {
               auto m = service.media(req.matches[1], req.matches[2]);
               res.set_content(m.bytes, m.content_type.c_str());
             }));
  server.Get("/targets", guarded([&](const httplib::Request&, httplib::Response& res) {
               send_json(res, service.list_targets());
             }));
  server.Get("/basis", guarded([&](const httplib::Request&, httplib::Response& res) {
               res.set_content(service.basis_text(), "application/json");
             }));
  server.Get("/directions", guarded([&](const httplib::Request&, httplib::Response& res) {
               res.set_content(service.directions_text(), "application/json");
             }));
  server.Get("/healthz", guarded([&](const httplib::Request&, httplib::Response& res) {
               send_json(res, service.healthz());
             }));
}

int run_server(VoiceService& service, const std::function<void(int)>& on_ready) {
  httplib::Server server;
  const int threads = service.config().http_threads;
  server.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  install_routes(server, service);
  int port = service.config().port;
  if (port == 0) {
    port = server.bind_to_any_port(service.config().host);
  } else {
    require(server.bind_to_port(service.config().host, port), ErrorCode::IoError,
            "cannot bind " + service.config().host + ":" + std::to_string(port));
  }
  require(port > 0, ErrorCode::IoError, "cannot bind a port");
  if (on_ready) on_ready(port);
  return server.listen_after_bind() ? 0 : 1;
}

}  // namespace voiceloop
