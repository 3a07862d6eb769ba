#include "helper/emu/server.hpp"

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <future>
#include <mutex>
#include <thread>

#include "helper/emu/world.hpp"

namespace helper::emu {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

class Session;

/// The only channel between client I/O and the world thread.
struct Hub {
  struct Command {
    enum class Kind { kConnect, kText, kDisconnect, kReplay };
    Kind kind = Kind::kText;
    std::weak_ptr<Session> who;
    std::string text;
    std::shared_ptr<std::promise<sim::Scenario>> replay;
  };

  std::mutex mutex;
  std::condition_variable cv;
  std::deque<Command> queue;
  bool stopping = false;

  void push(Command c) {
    {
      std::lock_guard lock(mutex);
      queue.push_back(std::move(c));
    }
    cv.notify_one();
  }
};

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket&& socket, Hub& hub) : ws_(std::move(socket)), hub_(hub) {}

  void run() {
    net::dispatch(ws_.get_executor(), beast::bind_front_handler(&Session::on_run, shared_from_this()));
  }

  void send(std::shared_ptr<const std::string> text) {
    net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)] {
      self->outbox_.push_back(text);
      if (self->outbox_.size() == 1) self->write_next();
    });
  }

 private:
  void on_run() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(beast::bind_front_handler(&Session::on_accept, shared_from_this()));
  }

  void on_accept(beast::error_code ec) {
    if (ec) return;
    hub_.push({Hub::Command::Kind::kConnect, weak_from_this(), {}, nullptr});
    read_next();
  }

  void read_next() {
    ws_.async_read(buffer_, beast::bind_front_handler(&Session::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      hub_.push({Hub::Command::Kind::kDisconnect, weak_from_this(), {}, nullptr});
      return;
    }
    hub_.push({Hub::Command::Kind::kText, weak_from_this(), beast::buffers_to_string(buffer_.data()),
               nullptr});
    buffer_.consume(buffer_.size());
    read_next();
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(*outbox_.front()),
                    beast::bind_front_handler(&Session::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      outbox_.clear();
      return;
    }
    outbox_.pop_front();
    if (!outbox_.empty()) write_next();
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> outbox_;
  Hub& hub_;
};

}  // namespace

struct EmuServer::Impl {
  Impl(sim::Scenario sc, ServeOptions opt) : options(std::move(opt)), world(std::move(sc)) {}

  ServeOptions options;
  World world;  // touched only by the world thread once started
  Hub hub;
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  net::signal_set signals{ioc};
  std::thread io_thread;
  std::thread world_thread;
  bool started = false;
  bool stopped = false;

  std::mutex wait_mutex;
  std::condition_variable wait_cv;
  bool stop_requested = false;

  void note(const std::string& line) const {
    if (options.log) options.log(line);
  }

  void request_stop() {
    {
      std::lock_guard lock(wait_mutex);
      stop_requested = true;
    }
    wait_cv.notify_all();
  }

  void accept_next() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        if (acceptor.is_open()) note("accept failed: " + ec.message());
      } else {
        std::make_shared<Session>(std::move(socket), hub)->run();
      }
      if (acceptor.is_open()) accept_next();
    });
  }

  void world_loop() {
    using clock = std::chrono::steady_clock;
    const auto wall0 = clock::now();
    const double start_t = world.now();
    std::vector<std::weak_ptr<Session>> clients;
    auto broadcast = [&](const std::vector<json>& frames) {
      std::erase_if(clients, [](const auto& w) { return w.expired(); });
      for (const auto& f : frames) {
        auto text = std::make_shared<const std::string>(f.dump());
        for (const auto& w : clients) {
          if (auto s = w.lock()) s->send(text);
        }
      }
    };
    const auto step = std::chrono::duration<double>(options.step_interval_s);
    for (;;) {
      std::deque<Hub::Command> batch;
      {
        std::unique_lock lock(hub.mutex);
        hub.cv.wait_for(lock, step, [&] { return hub.stopping || !hub.queue.empty(); });
        if (hub.stopping) break;
        batch.swap(hub.queue);
      }
      const double elapsed = std::chrono::duration<double>(clock::now() - wall0).count();
      broadcast(world.advance_to(start_t + elapsed * options.time_scale));
      for (auto& cmd : batch) {
        switch (cmd.kind) {
          case Hub::Command::Kind::kConnect:
            if (auto s = cmd.who.lock()) {
              s->send(std::make_shared<const std::string>(world.snapshot().dump()));
              clients.push_back(cmd.who);
              note("client connected (" + std::to_string(clients.size()) + " total)");
            }
            break;
          case Hub::Command::Kind::kDisconnect:
            std::erase_if(clients, [&](const auto& w) {
              return w.expired() || (!w.owner_before(cmd.who) && !cmd.who.owner_before(w));
            });
            note("client disconnected");
            break;
          case Hub::Command::Kind::kText: {
            Outbound out = world.handle(cmd.text);
            if (auto s = cmd.who.lock()) s->send(std::make_shared<const std::string>(out.reply.dump()));
            broadcast(out.broadcast);
            break;
          }
          case Hub::Command::Kind::kReplay:
            cmd.replay->set_value(world.replay_scenario());
            break;
        }
      }
    }
    // Answer any replay request that raced with shutdown.
    std::lock_guard lock(hub.mutex);
    for (auto& cmd : hub.queue) {
      if (cmd.replay) cmd.replay->set_value(world.replay_scenario());
    }
    hub.queue.clear();
  }
};

EmuServer::EmuServer(sim::Scenario sc, ServeOptions options)
    : impl_(std::make_unique<Impl>(std::move(sc), std::move(options))) {}

EmuServer::~EmuServer() { stop(); }

unsigned short EmuServer::start() {
  auto& im = *impl_;
  if (im.started) return im.acceptor.local_endpoint().port();
  const tcp::endpoint endpoint{net::ip::make_address(im.options.address), im.options.port};
  im.acceptor.open(endpoint.protocol());
  im.acceptor.set_option(net::socket_base::reuse_address(true));
  im.acceptor.bind(endpoint);
  im.acceptor.listen(net::socket_base::max_listen_connections);
  im.accept_next();
  im.signals.add(SIGINT);
  im.signals.add(SIGTERM);
  im.signals.async_wait([&im](beast::error_code ec, int) {
    if (!ec) im.request_stop();
  });
  im.started = true;
  im.io_thread = std::thread([&im] { im.ioc.run(); });
  im.world_thread = std::thread([&im] { im.world_loop(); });
  const auto port = im.acceptor.local_endpoint().port();
  im.note("listening on ws://" + im.options.address + ":" + std::to_string(port));
  return port;
}

void EmuServer::stop() {
  auto& im = *impl_;
  if (!im.started || im.stopped) return;
  im.stopped = true;
  {
    std::lock_guard lock(im.hub.mutex);
    im.hub.stopping = true;
  }
  im.hub.cv.notify_all();
  if (im.world_thread.joinable()) im.world_thread.join();
  net::post(im.ioc, [&im] {
    beast::error_code ec;
    im.acceptor.close(ec);
    im.signals.cancel(ec);
  });
  im.ioc.stop();
  if (im.io_thread.joinable()) im.io_thread.join();
  im.request_stop();
}

void EmuServer::wait() {
  auto& im = *impl_;
  std::unique_lock lock(im.wait_mutex);
  im.wait_cv.wait(lock, [&] { return im.stop_requested; });
}

sim::Scenario EmuServer::replay_scenario() {
  auto& im = *impl_;
  if (!im.started || im.stopped) return im.world.replay_scenario();
  auto promise = std::make_shared<std::promise<sim::Scenario>>();
  auto future = promise->get_future();
  im.hub.push({Hub::Command::Kind::kReplay, {}, {}, promise});
  return future.get();
}

}  // namespace helper::emu
