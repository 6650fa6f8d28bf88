#include "hdsac/bridge.hpp"

#include "hdsac/errors.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <set>
#include <thread>

namespace hdsac::bridge {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

/// Frames a slow client has not received yet; older ones are dropped.
constexpr std::size_t kClientBacklog = 2;

}  // namespace

class Session;

struct Server::Impl {
    ServerConfig cfg;
    std::shared_ptr<supervisor::HumanMailbox> mailbox;
    CommandApplier applier;
    DropOldestQueue outbound;

    asio::io_context ioc;
    std::optional<tcp::acceptor> acceptor;
    std::thread io_thread;
    std::uint16_t bound_port = 0;
    bool running = false;

    // Owned by the I/O thread.
    std::set<std::shared_ptr<Session>> sessions;
    Session* controller = nullptr;

    // Touched by the publishing thread only.
    std::optional<std::int64_t> last_step;

    mutable std::mutex stats_mu;
    ServerStats stats;

    Impl(ServerConfig c, std::shared_ptr<supervisor::HumanMailbox> m)
        : cfg(std::move(c)), mailbox(m), applier(std::move(m)), outbound(cfg.queue_depth) {}

    void accept();
    void drain();
    void attach(const std::shared_ptr<Session>& s, Role role);
    void detach(Session* s);
    void on_command(Session* s, const std::string& text);
    void update_stats() {
        std::lock_guard lock(stats_mu);
        stats.clients = static_cast<int>(sessions.size());
        stats.controller_connected = controller != nullptr;
        stats.ignored_actions = applier.ignored_actions();
    }
};

class Session : public std::enable_shared_from_this<Session> {
public:
    Session(tcp::socket socket, Server::Impl& server) : ws_(std::move(socket)), server_(server) {}

    void run() {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.text(true);
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->read();
        });
    }

    /// Queues a frame; only called once the client was welcomed.
    void send_frame(std::shared_ptr<const std::string> frame) {
        if (!welcomed_ || closing_) return;
        if (pending_frames_ >= kClientBacklog) {
            // Replace the oldest frame still waiting behind the write in flight.
            for (auto it = outbox_.begin() + (writing_ ? 1 : 0); it != outbox_.end(); ++it) {
                if (it->frame) {
                    outbox_.erase(it);
                    --pending_frames_;
                    break;
                }
            }
        }
        ++pending_frames_;
        outbox_.push_back({std::move(frame), true});
        write_next();
    }

    void send_text(std::string text, bool close_after = false) {
        outbox_.push_back({std::make_shared<const std::string>(std::move(text)), false});
        if (close_after) closing_ = true;
        write_next();
    }

    Role role() const { return role_; }

private:
    struct Outgoing {
        std::shared_ptr<const std::string> text;
        bool frame = false;
    };

    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->server_.detach(self.get());
                return;
            }
            std::string text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            self->on_message(text);
            if (!self->closing_) self->read();
        });
    }

    void on_message(const std::string& text) {
        if (!welcomed_) {
            handshake(text);
            return;
        }
        server_.on_command(this, text);
    }

    void handshake(const std::string& text) {
        Hello hello;
        try {
            hello = decode_hello(text);
        } catch (const FormatError& e) {
            refuse(std::string("bad hello: ") + e.what());
            return;
        }
        if (hello.version != kWireVersion) {
            refuse("wire version " + std::to_string(hello.version) + " not supported, server speaks " +
                   std::to_string(kWireVersion));
            return;
        }
        const Role granted = hello.role == Role::control && server_.controller == nullptr ? Role::control : Role::view;
        role_ = granted;
        welcomed_ = true;
        server_.attach(shared_from_this(), granted);
        send_text(encode_welcome(granted));
    }

    void refuse(const std::string& reason) {
        {
            std::lock_guard lock(server_.stats_mu);
            ++server_.stats.refused;
        }
        send_text(encode_refused(reason), true);
    }

    void write_next() {
        if (writing_ || outbox_.empty()) return;
        writing_ = true;
        auto text = outbox_.front().text;
        ws_.async_write(asio::buffer(*text), [self = shared_from_this(), text](beast::error_code ec, std::size_t) {
            self->writing_ = false;
            if (self->outbox_.front().frame) --self->pending_frames_;
            self->outbox_.pop_front();
            if (ec) {
                self->server_.detach(self.get());
                return;
            }
            if (self->outbox_.empty() && self->closing_) {
                self->ws_.async_close(websocket::close_code::policy_error, [self](beast::error_code) {
                    self->server_.detach(self.get());
                });
                return;
            }
            self->write_next();
        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    Server::Impl& server_;
    beast::flat_buffer buffer_;
    std::deque<Outgoing> outbox_;
    std::size_t pending_frames_ = 0;
    bool writing_ = false;
    bool welcomed_ = false;
    bool closing_ = false;
    Role role_ = Role::view;
};

void Server::Impl::accept() {
    acceptor->async_accept(asio::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
        if (ec) return;  // acceptor closed
        std::make_shared<Session>(std::move(socket), *this)->run();
        accept();
    });
}

void Server::Impl::attach(const std::shared_ptr<Session>& s, Role role) {
    sessions.insert(s);
    if (role == Role::control) controller = s.get();
    update_stats();
}

void Server::Impl::detach(Session* s) {
    if (controller == s) {
        controller = nullptr;
        applier.release();
    }
    for (auto it = sessions.begin(); it != sessions.end(); ++it) {
        if (it->get() == s) {
            sessions.erase(it);
            break;
        }
    }
    update_stats();
}

void Server::Impl::on_command(Session* s, const std::string& text) {
    CommandMessage cmd;
    try {
        cmd = decode_command(text);
    } catch (const FormatError& e) {
        s->send_text(encode_refused(std::string("bad command: ") + e.what()));
        return;
    }
    if (s != controller) {
        // Read-only clients cannot steer.
        s->send_text(encode_ack(cmd.kind, false, applier.ignored_actions()));
        return;
    }
    applier.apply(cmd, std::chrono::steady_clock::now());
    update_stats();
    s->send_text(encode_ack(cmd.kind, applier.engaged(), applier.ignored_actions()));
}

void Server::Impl::drain() {
    while (auto text = outbound.pop()) {
        auto shared = std::make_shared<const std::string>(std::move(*text));
        for (const auto& s : sessions) s->send_frame(shared);
    }
}

Server::Server(ServerConfig cfg, std::shared_ptr<supervisor::HumanMailbox> mailbox)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(mailbox))) {}

Server::~Server() { stop(); }

void Server::start() {
    if (impl_->running) throw ContractViolation("bridge server already started");
    beast::error_code ec;
    const auto address = asio::ip::make_address(impl_->cfg.address, ec);
    if (ec) throw ConfigError("bridge address '" + impl_->cfg.address + "' is invalid: " + ec.message());
    const tcp::endpoint endpoint(address, impl_->cfg.port);
    auto& acc = impl_->acceptor.emplace(impl_->ioc);
    acc.open(endpoint.protocol(), ec);
    if (!ec) acc.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acc.bind(endpoint, ec);
    if (!ec) acc.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) {
        impl_->acceptor.reset();
        throw IoError("bridge cannot listen on " + impl_->cfg.address + ":" + std::to_string(impl_->cfg.port) + ": " +
                      ec.message());
    }
    impl_->bound_port = acc.local_endpoint().port();
    impl_->accept();
    impl_->running = true;
    impl_->io_thread = std::thread([this] { impl_->ioc.run(); });
}

void Server::stop() {
    if (!impl_->running) return;
    asio::post(impl_->ioc, [this] {
        beast::error_code ec;
        impl_->acceptor->close(ec);
        impl_->sessions.clear();
        impl_->controller = nullptr;
        impl_->ioc.stop();
    });
    impl_->io_thread.join();
    impl_->running = false;
    impl_->update_stats();
}

std::uint16_t Server::port() const { return impl_->bound_port; }

void Server::publish(const FrameMessage& frame) {
    if (impl_->last_step && frame.step <= *impl_->last_step)
        throw ContractViolation("frame steps must increase strictly: " + std::to_string(frame.step) + " after " +
                                std::to_string(*impl_->last_step));
    impl_->last_step = frame.step;
    impl_->outbound.push(encode_frame(frame));
    {
        std::lock_guard lock(impl_->stats_mu);
        ++impl_->stats.frames_published;
        impl_->stats.frames_dropped = impl_->outbound.dropped();
    }
    if (impl_->running) asio::post(impl_->ioc, [this] { impl_->drain(); });
}

ServerStats Server::stats() const {
    std::lock_guard lock(impl_->stats_mu);
    return impl_->stats;
}

}  // namespace hdsac::bridge
