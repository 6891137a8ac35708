#!/usr/bin/env python3
"""
Script para verificar la configuración del laboratorio sin lanzar ningún cálculo.
"""

import json
import os
from pathlib import Path


def check_file(filepath, required=True):
    """Verificar si un archivo existe."""
    exists = Path(filepath).exists()
    status = "✅" if exists else ("❌" if required else "⚠️")
    req_text = "(requerido)" if required else "(opcional)"
    print(f"{status} {filepath} {req_text}")
    return exists


def check_env_file():
    """Verificar archivo .env y los valores de ADIABATLAB_*."""
    print("\n📋 Verificando archivo .env...")

    if not check_file(".env", required=False):
        print("   → Se usarán los valores por defecto (ver .env.example)")

    from dotenv import load_dotenv
    load_dotenv()

    from adiabatlab.errors import ConfigError
    from adiabatlab.settings import get_settings

    try:
        settings = get_settings()
    except ConfigError as e:
        print(f"   ❌ {e.pointer}: {e.message}")
        return False

    print(f"   ✅ Hilos: {settings.threads}")
    print(f"   ✅ Presupuesto de sitios: {settings.site_budget}, de modos: {settings.mode_budget}")
    print(f"   ✅ Límite denso: {settings.dense_limit}, κ_max por defecto: {settings.kappa_max}")
    print(f"   ✅ Nivel de log: {settings.log_level}")
    return True


def check_json_file(filepath, required_keys=None):
    """Verificar archivo JSON."""
    if not check_file(filepath, required=True):
        return False

    try:
        with open(filepath, "r", encoding="utf-8") as f:
            data = json.load(f)
        print("   ✅ JSON válido")

        if required_keys:
            for key in required_keys:
                if key in data:
                    count = len(data[key]) if isinstance(data[key], (dict, list)) else 1
                    print(f"   ✅ '{key}': {count} elemento(s)")
                else:
                    print(f"   ❌ Falta clave '{key}'")
                    return False

        return True
    except json.JSONDecodeError as e:
        print(f"   ❌ Error de JSON: {e}")
        return False


def check_dependencies():
    """Verificar dependencias de Python."""
    print("\n📦 Verificando dependencias...")

    required_packages = [
        ("numpy", "numpy"),
        ("scipy", "scipy"),
        ("sympy", "sympy"),
        ("pandas", "pandas"),
        ("matplotlib", "matplotlib"),
        ("dotenv", "python-dotenv"),
        ("aiofiles", "aiofiles"),
        ("markdown", "markdown"),
    ]

    all_ok = True
    for module, package in required_packages:
        try:
            __import__(module)
            print(f"   ✅ {package}")
        except ImportError:
            print(f"   ❌ {package} no instalado")
            all_ok = False

    return all_ok


def check_commands_config(config_dir):
    """Verificar configuración de comandos."""
    print("\n⚙️  Verificando commands.json...")
    path = config_dir / "commands.json"

    if not check_json_file(path, required_keys=["commands"]):
        print("   → Se creará uno por defecto en la primera ejecución")
        return False

    from adiabatlab.handlers.command import DRIVERS

    with open(path, "r", encoding="utf-8") as f:
        commands = json.load(f).get("commands", {})
    print(f"   ℹ️  {len(commands)} comando(s) configurado(s)")

    all_ok = True
    for cmd in commands:
        if cmd in DRIVERS:
            print(f"   ✅ {cmd}")
        else:
            print(f"   ❌ {cmd}: comando desconocido")
            all_ok = False
    return all_ok


def check_models(config_dir):
    """Validar los modelos de la galería."""
    print("\n🧪 Verificando modelos...")
    from adiabatlab.errors import LabError
    from adiabatlab.models.config import load_model_config

    paths = sorted((config_dir / "models").glob("*.json"))
    if not paths:
        print("   ❌ No hay modelos en config/models")
        return False

    all_ok = True
    for path in paths:
        try:
            config = load_model_config(path)
            print(f"   ✅ {config.name}: d={config.d}, k={config.ks}, g={config.g}, g̃={config.g_tilde}")
        except LabError as e:
            print(f"   ❌ {path.name}: {e.message} ({e.pointer})")
            all_ok = False
    return all_ok


def main():
    """Función principal."""
    print("🔍 Verificador de Configuración de adiabatlab")
    print("=" * 50)

    all_checks = []

    print("\n📁 Verificando archivos del proyecto...")
    all_checks.append(check_file("requirements.txt", required=True))

    all_checks.append(check_dependencies())
    all_checks.append(check_env_file())

    config_dir = Path(os.getenv("ADIABATLAB_CONFIG_DIR", "config"))
    all_checks.append(check_commands_config(config_dir))
    all_checks.append(check_models(config_dir))

    # Resumen final
    print("\n" + "=" * 50)
    if all(all_checks):
        print("✅ ¡Todas las verificaciones pasaron!")
        print("\n▶️  Puedes ejecutar: python -m adiabatlab.main check-gap m1")
    else:
        print("❌ Hay problemas con la configuración")
        print("\n📖 Revisa el README.md para más información")
        print("🔧 Ejecuta scripts/setup.sh para configuración inicial")
    print("=" * 50)


if __name__ == "__main__":
    try:
        main()
    except KeyboardInterrupt:
        print("\n\n⚠️  Verificación cancelada")
    except Exception as e:
        print(f"\n❌ Error durante la verificación: {e}")
        import traceback
        traceback.print_exc()
