#include <httplib.h>

#include <atomic>
#include <condition_variable>
#include <thread>

#include "qvote/gateway.hpp"

namespace qvote::gateway {

struct Server::Impl {
  explicit Impl(LiveElection& e) : election(e) {}

  LiveElection& election;
  httplib::Server http;
  std::mutex mu;
  std::condition_variable cv;
  bool stopping = false;
};

Server::Server(LiveElection& election) : impl_(std::make_unique<Impl>(election)) {
  // Plain address reuse only: a second server must not share a live port.
  impl_->http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    Query query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    const ApiResponse r = impl_->election.handle(req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  impl_->http.Get(".*", route);
  impl_->http.Post(".*", route);
  impl_->http.Put(".*", route);
  impl_->http.Delete(".*", route);
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->http.bind_to_any_port(host);
    if (bound <= 0) throw Error(ErrorCode::BindFailure, "cannot bind " + host + " on any port");
    return bound;
  }
  if (!impl_->http.bind_to_port(host, port)) {
    throw Error(ErrorCode::BindFailure, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Server::listen(Millis tick_ms) {
  std::thread ticker([this, tick_ms] {
    std::unique_lock lock(impl_->mu);
    while (!impl_->stopping) {
      lock.unlock();
      impl_->election.advance();
      lock.lock();
      impl_->cv.wait_for(lock, std::chrono::milliseconds(tick_ms), [this] { return impl_->stopping; });
    }
  });
  impl_->http.listen_after_bind();
  {
    std::lock_guard lock(impl_->mu);
    impl_->stopping = true;
  }
  impl_->cv.notify_all();
  ticker.join();
}

void Server::stop() {
  if (!impl_) return;
  {
    std::lock_guard lock(impl_->mu);
    impl_->stopping = true;
  }
  impl_->cv.notify_all();
  impl_->http.stop();
}

ApiResponse http_request(const std::string& base_url, std::string_view method, const std::string& path,
                         const nlohmann::json& body) {
  httplib::Client client(base_url);
  client.set_connection_timeout(5);
  client.set_read_timeout(30);
  httplib::Result res;
  if (method == "GET") {
    res = client.Get(path);
  } else if (method == "POST") {
    res = client.Post(path, body.is_null() ? std::string("{}") : body.dump(), "application/json");
  } else {
    return ApiResponse::error(0, "InvalidArgument", "unsupported method " + std::string(method));
  }
  if (!res) return ApiResponse::error(0, "Unreachable", base_url + ": " + httplib::to_string(res.error()));
  ApiResponse out;
  out.status = res->status;
  try {
    out.body = res->body.empty() ? nlohmann::json::object() : nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception&) {
    out.body = {{"code", "MalformedInput"}, {"reason", res->body}};
  }
  return out;
}

}  // namespace qvote::gateway
