#include "vtank/scheduler.hpp"

#include "vtank/error.hpp"
#include "vtank/io.hpp"

namespace vtank {
namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

ProcessResult LocalTransport::exec(const std::string& command, const std::map<std::string, std::string>& env) {
  ProcessOptions o;
  o.env = env;
  return run_process({"sh", "-c", command}, o);
}

void LocalTransport::put_file(const std::string& path, std::string_view data) { write_file(path, data); }

std::string LocalTransport::get_file(const std::string& path) {
  if (!fs::is_regular_file(path)) fail(Errc::NotFound, path + " does not exist");
  return read_file(path);
}

bool LocalTransport::exists(const std::string& path) { return fs::exists(path); }

SshTransport::SshTransport(std::string address, std::string username)
    : target_(username.empty() ? std::move(address) : username + "@" + address) {}

ProcessResult SshTransport::ssh(const std::string& remote_command, const std::string& stdin_data) {
  ProcessOptions o;
  o.stdin_data = stdin_data;
  ProcessResult r = run_process(
      {"ssh", "-o", "BatchMode=yes", "-o", "ConnectTimeout=10", target_, remote_command}, o);
  if (r.exit_code == 255) fail(Errc::Unreachable, "ssh " + target_ + ": " + trim(r.err));
  return r;
}

ProcessResult SshTransport::exec(const std::string& command, const std::map<std::string, std::string>& env) {
  std::string prefix;
  for (const auto& [k, v] : env) prefix += k + "=" + shell_quote(v) + " ";
  return ssh(prefix + "sh -c " + shell_quote(command));
}

void SshTransport::put_file(const std::string& path, std::string_view data) {
  const std::string dir = fs::path(path).parent_path().string();
  const std::string tmp = path + ".part";
  auto r = ssh("mkdir -p " + shell_quote(dir) + " && cat > " + shell_quote(tmp) + " && mv " + shell_quote(tmp) + " " +
                   shell_quote(path),
               std::string(data));
  if (!r.ok()) fail(Errc::Io, "upload of " + path + " failed: " + trim(r.err));
}

std::string SshTransport::get_file(const std::string& path) {
  auto r = ssh("cat " + shell_quote(path));
  if (!r.ok()) fail(Errc::NotFound, path + ": " + trim(r.err));
  return r.out;
}

bool SshTransport::exists(const std::string& path) { return ssh("test -e " + shell_quote(path)).ok(); }

}  // namespace vtank
