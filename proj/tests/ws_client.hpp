#pragma once

// Minimal WebSocket client for tests: its own I/O thread, received text
// messages collected in a queue, sends serialized through the I/O thread.

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace hdsac::testing {

class WsClient {
public:
    explicit WsClient(std::uint16_t port) : ws_(ioc_) {
        namespace asio = boost::asio;
        asio::ip::tcp::resolver resolver(ioc_);
        ws_.next_layer().connect(*resolver.resolve("127.0.0.1", std::to_string(port)).begin());
        ws_.handshake("127.0.0.1", "/");
        ws_.text(true);
        read_loop();
        io_ = std::thread([this] { ioc_.run(); });
    }

    ~WsClient() { close(); }

    void send(std::string text) {
        boost::asio::post(ioc_, [this, t = std::move(text)]() mutable {
            outbox_.push_back(std::move(t));
            if (outbox_.size() == 1) write_next();
        });
    }

    /// Next received message, or nullopt after `timeout`.
    std::optional<std::string> receive(std::chrono::milliseconds timeout = std::chrono::milliseconds(2000)) {
        std::unique_lock lock(mu_);
        if (!cv_.wait_for(lock, timeout, [&] { return !inbox_.empty() || closed_; })) return std::nullopt;
        if (inbox_.empty()) return std::nullopt;
        std::string s = std::move(inbox_.front());
        inbox_.pop_front();
        return s;
    }

    /// True once the server closed the connection.
    bool wait_closed(std::chrono::milliseconds timeout = std::chrono::milliseconds(2000)) {
        std::unique_lock lock(mu_);
        return cv_.wait_for(lock, timeout, [&] { return closed_; });
    }

    void close() {
        if (!io_.joinable()) return;
        boost::asio::post(ioc_, [this] {
            // A server that already went away never completes the close handshake.
            deadline_.expires_after(std::chrono::milliseconds(500));
            deadline_.async_wait([this](boost::beast::error_code) { ioc_.stop(); });
            ws_.async_close(boost::beast::websocket::close_code::normal, [this](boost::beast::error_code) { ioc_.stop(); });
        });
        io_.join();
    }

private:
    void read_loop() {
        ws_.async_read(buffer_, [this](boost::beast::error_code ec, std::size_t) {
            std::lock_guard lock(mu_);
            if (ec) {
                closed_ = true;
                cv_.notify_all();
                return;
            }
            inbox_.push_back(boost::beast::buffers_to_string(buffer_.data()));
            buffer_.consume(buffer_.size());
            cv_.notify_all();
            read_loop();
        });
    }

    void write_next() {
        ws_.async_write(boost::asio::buffer(outbox_.front()), [this](boost::beast::error_code ec, std::size_t) {
            outbox_.pop_front();
            if (!ec && !outbox_.empty()) write_next();
        });
    }

    boost::asio::io_context ioc_;
    boost::beast::websocket::stream<boost::beast::tcp_stream> ws_;
    boost::beast::flat_buffer buffer_;
    boost::asio::steady_timer deadline_{ioc_};
    std::deque<std::string> outbox_;
    std::thread io_;

    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::string> inbox_;
    bool closed_ = false;
};

}  // namespace hdsac::testing
