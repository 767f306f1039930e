import { startApp } from "./client.js";

const root = document.getElementById("app");
if (root) startApp(root);
