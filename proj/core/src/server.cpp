#include "hilsim/server.hpp"

#include "hilsim/error.hpp"

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <thread>

namespace hilsim {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket&& socket, ControlHub& hub) : ws_(std::move(socket)), hub_(hub) {}

    void run(http::request<http::string_body> req)
    {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
    }

private:
    void on_accept(beast::error_code ec)
    {
        if (ec) {
            return;
        }
        session_ = hub_.connect();
        std::weak_ptr<WsSession> weak = shared_from_this();
        session_->set_notify([weak] {
            if (auto self = weak.lock()) {
                net::post(self->ws_.get_executor(), [self] { self->drain(); });
            }
        });
        do_read();
    }

    void do_read()
    {
        ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t)
    {
        if (ec) {
            close();
            return;
        }
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        hub_.handle(*session_, text);
        do_read();
    }

    void drain()
    {
        if (writing_ || closed_) {
            return;
        }
        auto next = session_->pop();
        if (!next) {
            return;
        }
        writing_ = true;
        out_ = std::move(*next);
        ws_.text(true);
        ws_.async_write(net::buffer(out_), beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t)
    {
        writing_ = false;
        if (ec) {
            close();
            return;
        }
        drain();
    }

    void close()
    {
        if (closed_) {
            return;
        }
        closed_ = true;
        if (session_) {
            session_->set_notify({});
            hub_.disconnect(session_);
        }
    }

    websocket::stream<beast::tcp_stream> ws_;
    ControlHub& hub_;
    beast::flat_buffer buffer_;
    std::shared_ptr<Session> session_;
    std::string out_;
    bool writing_ = false;
    bool closed_ = false;
};

http::response<http::string_body> json_response(const http::request<http::string_body>& req, http::status status,
                                                 const nlohmann::json& body)
{
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::content_type, "application/json");
    res.set(http::field::access_control_allow_origin, "*");
    res.keep_alive(req.keep_alive());
    res.body() = body.dump();
    res.prepare_payload();
    return res;
}

http::response<http::string_body> route(ControlHub& hub, const http::request<http::string_body>& req)
{
    const std::string target(req.target());
    try {
        if (req.method() == http::verb::get && target == "/health") {
            return json_response(req, http::status::ok, {{"status", "ok"}, {"v", kProtocolVersion}});
        }
        if (req.method() == http::verb::get && target == "/state") {
            return json_response(req, http::status::ok, hub.state_snapshot());
        }
        if (req.method() == http::verb::post && target == "/scenario") {
            return json_response(req, http::status::ok, hub.upload_scenario(req.body()));
        }
    } catch (const Error& e) {
        return json_response(req, http::status::bad_request, {{"code", to_string(e.code())}, {"message", e.what()}});
    }
    return json_response(req, http::status::not_found, {{"code", "not_found"}, {"message", target}});
}

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket&& socket, ControlHub& hub) : stream_(std::move(socket)), hub_(hub) {}

    void run()
    {
        net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::do_read, shared_from_this()));
    }

private:
    void do_read()
    {
        req_ = {};
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t)
    {
        if (ec) {
            return;
        }
        if (websocket::is_upgrade(req_)) {
            if (req_.target() == "/ws") {
                stream_.expires_never();
                std::make_shared<WsSession>(stream_.release_socket(), hub_)->run(std::move(req_));
            }
            return;
        }
        res_ = route(hub_, req_);
        http::async_write(stream_, res_, beast::bind_front_handler(&HttpSession::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t)
    {
        if (ec) {
            return;
        }
        if (!res_.keep_alive()) {
            beast::error_code ignored;
            stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
            return;
        }
        do_read();
    }

    beast::tcp_stream stream_;
    ControlHub& hub_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
    http::response<http::string_body> res_;
};

} // namespace

struct Server::Impl {
    Impl(ControlHub& h, const std::string& address, unsigned short port)
        : hub(h), acceptor(ioc)
    {
        const tcp::endpoint endpoint{net::ip::make_address(address), port};
        acceptor.open(endpoint.protocol());
        acceptor.set_option(net::socket_base::reuse_address(true));
        acceptor.bind(endpoint);
        acceptor.listen(net::socket_base::max_listen_connections);
    }

    void accept()
    {
        acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
            if (ec) {
                return;
            }
            std::make_shared<HttpSession>(std::move(socket), hub)->run();
            accept();
        });
    }

    ControlHub& hub;
    net::io_context ioc;
    tcp::acceptor acceptor;
    std::thread thread;
};

Server::Server(ControlHub& hub, std::string address, unsigned short port)
{
    try {
        impl_ = std::make_unique<Impl>(hub, address, port);
    } catch (const boost::system::system_error& e) {
        throw Error(ErrorCode::IoError, std::string("cannot listen: ") + e.what());
    }
}

Server::~Server()
{
    stop();
}

void Server::start()
{
    if (impl_->thread.joinable()) {
        return;
    }
    impl_->accept();
    impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

void Server::stop()
{
    if (!impl_ || !impl_->thread.joinable()) {
        return;
    }
    impl_->ioc.stop();
    impl_->thread.join();
}

unsigned short Server::port() const
{
    return impl_->acceptor.local_endpoint().port();
}

} // namespace hilsim
