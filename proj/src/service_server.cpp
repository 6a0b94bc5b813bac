// Copyright 2026 The xptrav Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <chrono>
#include <csignal>
#include <deque>
#include <map>
#include <memory>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "xptrav/binary_io.hpp"
#include "xptrav/service.hpp"

namespace xptrav {

namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

constexpr std::size_t kMaxQueuedFrames = 512;

class Hub;

class Client : public std::enable_shared_from_this<Client> {
 public:
  Client(tcp::socket socket, Hub& hub, ClientId id) : ws_(std::move(socket)), hub_(hub), id_(id) {}

  void start();
  void send(std::string frame);
  void close();
  ClientId id() const { return id_; }

 private:
  void read();
  void write();

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  Hub& hub_;
  ClientId id_;
  bool open_ = false;
  bool closing_ = false;
};

/// Owns the core and every connection; all handlers run on one io thread.
class Hub {
 public:
  Hub(net::io_context& ioc, const ServiceConfig& cfg, std::atomic<bool>* stop)
      : ioc_(ioc),
        acceptor_(ioc),
        timer_(ioc),
        signals_(ioc, SIGINT, SIGTERM),
        core_(generate_world(load_world_spec(cfg.world_path)), cfg.resolved_pipeline(), cfg.snapshot_dir),
        dt_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(cfg.dt))),
        stop_(stop) {
    const tcp::endpoint endpoint(net::ip::address_v4::any(), static_cast<unsigned short>(cfg.port));
    beast::error_code ec;
    acceptor_.open(endpoint.protocol(), ec);
    if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(endpoint, ec);
    if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
    if (ec) throw IoError("cannot listen on port " + std::to_string(cfg.port) + ": " + ec.message());
    signals_.async_wait([this](beast::error_code, int) { shutdown(); });
  }

  int port() const { return acceptor_.local_endpoint().port(); }

  void run() {
    accept();
    next_tick_ = std::chrono::steady_clock::now() + dt_;
    schedule();
  }

  void connected(const std::shared_ptr<Client>& client) {
    clients_[client->id()] = client;
    for (std::string& f : core_.on_connect(client->id())) client->send(std::move(f));
  }

  void disconnected(ClientId id) {
    if (clients_.erase(id) > 0) core_.on_disconnect(id);
  }

  void message(const std::shared_ptr<Client>& client, std::string_view text) {
    Outbox out = core_.on_message(client->id(), text);
    for (std::string& f : out.reply) client->send(std::move(f));
    broadcast(out.broadcast);
  }

 private:
  void accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<Client>(std::move(socket), *this, next_id_++)->start();
      accept();
    });
  }

  void schedule() {
    timer_.expires_at(next_tick_);
    timer_.async_wait([this](beast::error_code ec) {
      if (ec) return;
      if (stop_ != nullptr && stop_->load()) {
        shutdown();
        return;
      }
      broadcast(core_.tick().broadcast);
      next_tick_ += dt_;
      // After a stall, resume from the wall clock.
      const auto now = std::chrono::steady_clock::now();
      if (next_tick_ < now) next_tick_ = now;
      schedule();
    });
  }

  void broadcast(const std::vector<std::string>& frames) {
    for (auto& [id, weak] : clients_) {
      if (auto c = weak.lock()) {
        for (const std::string& f : frames) c->send(f);
      }
    }
  }

  void shutdown() {
    beast::error_code ec;
    acceptor_.close(ec);
    timer_.cancel();
    signals_.cancel();
    for (auto& [id, weak] : clients_) {
      if (auto c = weak.lock()) c->close();
    }
    core_.settle();
    ioc_.stop();
  }

  net::io_context& ioc_;
  tcp::acceptor acceptor_;
  net::steady_timer timer_;
  net::signal_set signals_;
  TeleopCore core_;
  std::chrono::steady_clock::duration dt_;
  std::chrono::steady_clock::time_point next_tick_;
  std::atomic<bool>* stop_;
  std::map<ClientId, std::weak_ptr<Client>> clients_;
  ClientId next_id_ = 1;
};

void Client::start() {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
    if (ec) return;
    self->open_ = true;
    self->hub_.connected(self);
    self->read();
  });
}

void Client::read() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->open_ = false;
      self->hub_.disconnected(self->id_);
      return;
    }
    if (!self->ws_.got_text()) {
      self->send(error_frame("binary frames are not supported"));
    } else {
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->hub_.message(self, text);
    }
    self->buffer_.consume(self->buffer_.size());
    self->read();
  });
}

void Client::send(std::string frame) {
  if (!open_) return;
  if (queue_.size() >= kMaxQueuedFrames) {
    close();
    return;
  }
  queue_.push_back(std::move(frame));
  if (queue_.size() == 1) write();
}

void Client::write() {
  ws_.text(true);
  ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->queue_.clear();
      return;
    }
    self->queue_.pop_front();
    if (!self->queue_.empty()) {
      self->write();
    } else if (self->closing_) {
      self->ws_.async_close(websocket::close_code::normal, [self](beast::error_code) {});
    }
  });
}

void Client::close() {
  if (!open_) return;
  open_ = false;
  closing_ = true;
  // The frame at the front may be in flight; drop only the ones behind it.
  if (queue_.size() > 1) queue_.erase(queue_.begin() + 1, queue_.end());
  if (queue_.empty()) {
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }
}

}  // namespace

void serve(const ServiceConfig& cfg, std::atomic<bool>* stop, const std::function<void(int)>& on_listening) {
  cfg.validate();
  net::io_context ioc;
  Hub hub(ioc, cfg, stop);
  if (on_listening) on_listening(hub.port());
  hub.run();
  ioc.run();
}

}  // namespace xptrav
