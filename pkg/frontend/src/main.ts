import { ReviewApi } from "./api.js";
import { mountApp } from "./app.js";

function reviewerId(): string {
  const params = new URLSearchParams(window.location.search);
  const fromUrl = params.get("reviewer");
  if (fromUrl) {
    localStorage.setItem("reviewerId", fromUrl);
    return fromUrl;
  }
  const stored = localStorage.getItem("reviewerId");
  if (stored) return stored;
  const generated = `reviewer-${Math.random().toString(36).slice(2, 8)}`;
  localStorage.setItem("reviewerId", generated);
  return generated;
}

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app element");
}
mountApp(root, new ReviewApi(), reviewerId());
