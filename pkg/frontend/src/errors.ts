// Every backend error code gets its own user-legible rendering.

import { ApiError, NetworkError } from "./api.js";

const MESSAGES: Record<string, string> = {
  bad_credentials: "Wrong username or password.",
  malformed_body: "The login request was malformed.",
  expired_token: "Your session expired. Please sign in again.",
  bad_signature: "Your session is no longer valid. Please sign in again.",
  malformed_token: "Your session is no longer valid. Please sign in again.",
  query_denied: "This query is not permitted for your role.",
  unknown_query: "This query is not available on the server.",
  missing_param: "A required parameter is missing.",
  bad_param_format: "A parameter has the wrong format.",
  input_blocked: "A parameter was blocked by the privacy filter.",
  bad_peer_secret: "Internal service authentication failed.",
  log_unavailable: "The audit service is unavailable; try again later.",
  audit_failure: "The request could not be audited; try again later.",
  internal_error: "The service hit an internal error; try again later.",
};

export function describeError(error: unknown): string {
  if (error instanceof NetworkError) {
    return "Cannot reach the backend. Check your connection and retry.";
  }
  if (error instanceof ApiError) {
    return MESSAGES[error.code] ?? `Unexpected error (${error.code}).`;
  }
  return "Something went wrong.";
}

// 401s on any authenticated call invalidate the session
export function isSessionEnd(error: unknown): boolean {
  return error instanceof ApiError && error.status === 401;
}

export function isRetriable(error: unknown): boolean {
  return (
    error instanceof NetworkError ||
    (error instanceof ApiError && error.status >= 500) ||
    (error instanceof ApiError && error.code === "log_unavailable")
  );
}
