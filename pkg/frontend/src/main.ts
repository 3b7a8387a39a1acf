import { initApp } from "./app";

const mount = document.getElementById("app");
if (mount) initApp(mount);
