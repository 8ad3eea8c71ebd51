/** Where the test instance of the session service listens. */
export const API_BASE = "http://127.0.0.1:8471";
